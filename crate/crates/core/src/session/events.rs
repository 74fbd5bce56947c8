use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::bot::Treatment;
use crate::game::{Dollars, GameConfig};
use crate::questionnaire::{CertaintyItem, Demographics, PresentedTimePref, TimePrefItem, TrustItem};

use super::flow::{Actor, Stage};
use super::service::SessionState;

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Global position in the log, starting at 1 with no gaps.
    pub seq: u64,
    pub timestamp_ms: u64,
    /// Session index the record belongs to; `None` for operator events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    /// Position within the subject's own stream, starting at 1 with no gaps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_seq: Option<u64>,
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Registered {
        slot: usize,
    },
    TreatmentAssigned {
        treatment: Treatment,
        seed: u64,
        game: GameConfig,
    },
    StageAdvanced {
        from: Stage,
        to: Stage,
    },
    Send {
        round: u32,
        amount: Dollars,
        by: Actor,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table_version: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wait_ms: Option<u64>,
    },
    Return {
        round: u32,
        amount: Dollars,
        by: Actor,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table_version: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wait_ms: Option<u64>,
    },
    TimePrefPresented {
        items: Vec<PresentedTimePref>,
    },
    TimePrefAnswered {
        items: Vec<TimePrefItem>,
    },
    TrustPresented {
        order: Vec<u8>,
    },
    TrustAnswered {
        items: Vec<TrustItem>,
    },
    CertaintyAnswered {
        items: Vec<CertaintyItem>,
    },
    DemographicsAnswered {
        demographics: Demographics,
    },
    DebriefAcknowledged {
        suspected_bot: bool,
    },
    SessionStateChanged {
        slot: usize,
        state: SessionState,
    },
    StrategyTableUploaded {
        version: String,
        toml: String,
    },
    LotteryDrawn {
        ordinal: u64,
        winner: String,
        payoff: Dollars,
        reward: Dollars,
        eligible: usize,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Registered { .. } => "registered",
            EventKind::TreatmentAssigned { .. } => "treatment_assigned",
            EventKind::StageAdvanced { .. } => "stage_advanced",
            EventKind::Send { .. } => "send",
            EventKind::Return { .. } => "return",
            EventKind::TimePrefPresented { .. } => "time_pref_presented",
            EventKind::TimePrefAnswered { .. } => "time_pref_answered",
            EventKind::TrustPresented { .. } => "trust_presented",
            EventKind::TrustAnswered { .. } => "trust_answered",
            EventKind::CertaintyAnswered { .. } => "certainty_answered",
            EventKind::DemographicsAnswered { .. } => "demographics_answered",
            EventKind::DebriefAcknowledged { .. } => "debrief_acknowledged",
            EventKind::SessionStateChanged { .. } => "session_state_changed",
            EventKind::StrategyTableUploaded { .. } => "strategy_table_uploaded",
            EventKind::LotteryDrawn { .. } => "lottery_drawn",
        }
    }
}

/// Source of event timestamps.
pub trait Clock: Send {
    fn now_ms(&mut self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&mut self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

/// Deterministic clock: starts at `start` and advances `step` per reading.
#[derive(Debug, Clone, Copy)]
pub struct LogicalClock {
    next: u64,
    step: u64,
}

impl LogicalClock {
    pub fn new(start: u64, step: u64) -> Self {
        LogicalClock { next: start, step }
    }
}

impl Default for LogicalClock {
    fn default() -> Self {
        LogicalClock::new(0, 1)
    }
}

impl Clock for LogicalClock {
    fn now_ms(&mut self) -> u64 {
        let now = self.next;
        self.next += self.step;
        now
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trips_as_json() {
        let rec = EventRecord {
            seq: 7,
            timestamp_ms: 12,
            slot: Some(0),
            subject_id: Some("S0001".into()),
            subject_seq: Some(3),
            event: EventKind::Send {
                round: 1,
                amount: Dollars(8),
                by: Actor::Bot,
                table_version: Some("v1".into()),
                wait_ms: Some(4200),
            },
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.contains(r#""kind":"send""#));
        assert!(line.contains(r#""by":"bot""#));
        let back: EventRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn logical_clock_ticks() {
        let mut c = LogicalClock::new(100, 5);
        assert_eq!(c.now_ms(), 100);
        assert_eq!(c.now_ms(), 105);
    }
}
