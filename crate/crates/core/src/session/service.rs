//! In-process experiment service: sessions, registration, treatment
//! assignment, submissions, export, lottery and strategy uploads. Every state
//! change goes through [`ExperimentService::commit`], which persists the event
//! before applying it.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bot::{StrategyConfig, StrategyError, Treatment};
use crate::game::{Dollars, GameConfig, Role};
use crate::questionnaire::{CertaintyAnswer, Demographics, PresentedTimePref, QuestionBank, RawAnswer, TrustQuestion};

use super::events::{Clock, EventKind, EventRecord, SystemClock};
use super::export::{export_dataset, ExportError, ExportTables};
use super::flow::{advance_stage, assignment_event, FlowContext, FlowError, Stage, Submission, SubjectFlow, WaitDelay};
use super::log::EventSink;
use super::lottery::{draw_lottery, LotteryDraw, LotteryEntry, LotteryError};

const LOTTERY_SALT: u64 = 0x6c6f_7474_6572_7921;

pub const DEBRIEF_TEXT: &str = "Thank you for taking part. Before you leave, there is something we need to tell \
you. The other participant in the game was not a person. It was a computer program that followed fixed rules. \
Half of the participants played against a program that sent and returned generous amounts, and the other half \
played against one that sent and returned little. We did not tell you this earlier because people decide \
differently when they know they face a computer, and the study measures how the experience of the game relates \
to your answers afterwards. Your answers stay anonymous. Your payoffs were real: they still determine your \
chance of winning the reward. If you would like your data removed, tell the experimenter and it will be \
deleted.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Scheduled,
    Open,
    Closed,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Scheduled => "scheduled",
            SessionState::Open => "open",
            SessionState::Closed => "closed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    /// 0-based index into the configured slot times.
    pub slot: usize,
    pub start: String,
    pub state: SessionState,
    pub roster: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid service configuration: {0}")]
    InvalidConfig(String),
    #[error("no session {0}")]
    UnknownSession(usize),
    #[error("session {slot} is {state}")]
    SessionState { slot: usize, state: SessionState },
    #[error("no subject {0}")]
    UnknownSubject(String),
    #[error("subject {0} already has a treatment")]
    DoubleAssignment(String),
    #[error("stale submission: subject is at sequence {current}, request expected {expected}")]
    StaleSequence { current: u64, expected: u64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Lottery(#[from] LotteryError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("event log write failed: {0}")]
    Io(#[from] io::Error),
    #[error("replay failed at seq {seq}: {reason}")]
    Replay { seq: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Session start times, `HH:MM`, ascending.
    pub slot_times: Vec<String>,
    pub session_minutes: u32,
    pub seed: u64,
    pub game: GameConfig,
    pub wait: WaitDelay,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            slot_times: ["10:00", "12:00", "14:00", "16:00", "18:00", "20:00", "22:00"].map(String::from).to_vec(),
            session_minutes: 90,
            seed: 0,
            game: GameConfig::default(),
            wait: WaitDelay::default(),
        }
    }
}

fn parse_hhmm(s: &str) -> Option<u32> {
    let (h, m) = s.trim().split_once(':')?;
    let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
    (h < 24 && m < 60 && m.to_string().len() <= 2).then_some(h * 60 + m)
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::InvalidConfig(m));
        if self.slot_times.is_empty() {
            return bad("at least one slot time is required".into());
        }
        if self.session_minutes == 0 {
            return bad("session_minutes must be positive".into());
        }
        if self.wait.min_ms > self.wait.max_ms {
            return bad(format!("wait.min_ms {} exceeds wait.max_ms {}", self.wait.min_ms, self.wait.max_ms));
        }
        self.game.validate().map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
        let mut prev_end: Option<(u32, &str)> = None;
        for t in &self.slot_times {
            let Some(start) = parse_hhmm(t) else {
                return bad(format!("slot time {t:?} is not HH:MM"));
            };
            if let Some((end, prev)) = prev_end {
                if start < end {
                    return bad(format!("slot {t} overlaps the session starting at {prev}"));
                }
            }
            let end = start + self.session_minutes;
            if end > 24 * 60 {
                return bad(format!("session starting at {t} runs past midnight"));
            }
            prev_end = Some((end, t));
        }
        Ok(())
    }
}

/// Operator settings as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub slot_times: Vec<String>,
    pub session_minutes: u32,
    pub seed: u64,
    pub game: GameConfig,
    pub wait: WaitDelay,
    pub strategy_table: Option<PathBuf>,
    pub questions: Option<PathBuf>,
    pub events_dir: Option<PathBuf>,
    pub export_dir: Option<PathBuf>,
    pub bind: String,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        let s = ServiceConfig::default();
        OperatorConfig {
            slot_times: s.slot_times,
            session_minutes: s.session_minutes,
            seed: s.seed,
            game: s.game,
            wait: s.wait,
            strategy_table: None,
            questions: None,
            events_dir: None,
            export_dir: None,
            bind: "127.0.0.1:8080".into(),
        }
    }
}

impl OperatorConfig {
    pub fn load(path: &Path) -> Result<OperatorConfig, ServiceError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ServiceError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn service(&self) -> ServiceConfig {
        ServiceConfig {
            slot_times: self.slot_times.clone(),
            session_minutes: self.session_minutes,
            seed: self.seed,
            game: self.game,
            wait: self.wait,
        }
    }
}

/// Fair coin for the arm plus a fresh per-subject seed.
pub fn assign_treatment<R: Rng + ?Sized>(rng: &mut R) -> (Treatment, u64) {
    let treatment = if rng.random_bool(0.5) { Treatment::HighTrust } else { Treatment::LowTrust };
    (treatment, rng.random())
}

/// What the participant interface may show. The arm and the nature of the
/// counterpart only appear once the subject reaches the debriefing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectView {
    pub subject_id: String,
    pub session: usize,
    pub stage: Stage,
    /// Number of events recorded for this subject; echo it back as
    /// `expected_seq` to guard against double submission.
    pub seq: u64,
    pub endowment: Dollars,
    pub multiplier: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending: Option<PendingView>,
    pub rounds: Vec<RoundView>,
    pub cumulative_payoff: Dollars,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wait_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub time_pref: Vec<PresentedTimePref>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trust: Vec<TrustQuestion>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certainty: Vec<CertaintyPrompt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debrief: Option<DebriefView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingView {
    pub round: u32,
    pub practice: bool,
    pub role: Role,
    /// For role B: the amount the counterpart sent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub received: Option<Dollars>,
    /// Largest amount the subject may enter now.
    pub max_input: Dollars,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundView {
    pub round: u32,
    pub practice: bool,
    pub role: Role,
    pub sent: Dollars,
    pub tripled: Dollars,
    pub returned: Dollars,
    pub payoff: Dollars,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertaintyPrompt {
    pub horizon_years: u32,
    pub agreement: String,
    pub certainty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebriefView {
    pub treatment: Treatment,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub subjects: usize,
    pub trust_rows: usize,
    pub discount_rows: usize,
    pub certainty_rows: usize,
}

pub struct ExperimentService {
    config: ServiceConfig,
    strategy: StrategyConfig,
    bank: QuestionBank,
    sessions: Vec<Session>,
    flows: BTreeMap<String, SubjectFlow>,
    log: Vec<EventRecord>,
    assignments: u64,
    lotteries: u64,
    clock: Box<dyn Clock>,
    sink: Option<Box<dyn EventSink>>,
}

impl fmt::Debug for ExperimentService {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExperimentService")
            .field("config", &self.config)
            .field("strategy", &self.strategy.version())
            .field("subjects", &self.flows.len())
            .field("events", &self.log.len())
            .finish()
    }
}

impl ExperimentService {
    pub fn new(config: ServiceConfig, strategy: StrategyConfig, bank: QuestionBank) -> Result<Self, ServiceError> {
        config.validate()?;
        let sessions = config
            .slot_times
            .iter()
            .enumerate()
            .map(|(slot, t)| Session { slot, start: t.trim().to_string(), state: SessionState::Scheduled, roster: vec![] })
            .collect();
        Ok(ExperimentService {
            config,
            strategy,
            bank,
            sessions,
            flows: BTreeMap::new(),
            log: Vec::new(),
            assignments: 0,
            lotteries: 0,
            clock: Box::new(SystemClock),
            sink: None,
        })
    }

    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn with_sink(mut self, sink: impl EventSink + 'static) -> Self {
        self.sink = Some(Box::new(sink));
        self
    }

    /// Rebuilds a service from a complete event log. No sink is attached and
    /// nothing is re-persisted.
    pub fn restore(
        config: ServiceConfig,
        strategy: StrategyConfig,
        bank: QuestionBank,
        events: &[EventRecord],
    ) -> Result<Self, ServiceError> {
        let mut svc = ExperimentService::new(config, strategy, bank)?;
        for rec in events {
            let fail = |reason: String| ServiceError::Replay { seq: rec.seq, reason };
            if rec.seq != svc.log.len() as u64 + 1 {
                return Err(fail(format!("expected seq {}", svc.log.len() + 1)));
            }
            svc.apply_record(rec).map_err(|e| fail(e.to_string()))?;
            svc.log.push(rec.clone());
        }
        Ok(svc)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn strategy(&self) -> &StrategyConfig {
        &self.strategy
    }

    pub fn bank(&self) -> &QuestionBank {
        &self.bank
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn flow(&self, subject_id: &str) -> Option<&SubjectFlow> {
        self.flows.get(subject_id)
    }

    /// Flows keyed and ordered by subject id.
    pub fn flows(&self) -> &BTreeMap<String, SubjectFlow> {
        &self.flows
    }

    fn ctx(&self) -> FlowContext<'_> {
        FlowContext { strategy: &self.strategy, bank: &self.bank, wait: self.config.wait }
    }

    fn session(&self, slot: usize) -> Result<&Session, ServiceError> {
        self.sessions.get(slot).ok_or(ServiceError::UnknownSession(slot))
    }

    fn subject(&self, id: &str) -> Result<&SubjectFlow, ServiceError> {
        self.flows.get(id).ok_or_else(|| ServiceError::UnknownSubject(id.to_string()))
    }

    /// Applies a record's effect to in-memory state.
    fn apply_record(&mut self, rec: &EventRecord) -> Result<(), ServiceError> {
        match (&rec.event, rec.subject_id.as_deref()) {
            (EventKind::Registered { slot }, Some(id)) => {
                if self.flows.contains_key(id) {
                    return Err(ServiceError::InvalidConfig(format!("subject {id} registered twice")));
                }
                let session = self.sessions.get_mut(*slot).ok_or(ServiceError::UnknownSession(*slot))?;
                session.roster.push(id.to_string());
                self.flows.insert(id.to_string(), SubjectFlow::registered(id, *slot));
            }
            (EventKind::SessionStateChanged { slot, state }, None) => {
                self.sessions.get_mut(*slot).ok_or(ServiceError::UnknownSession(*slot))?.state = *state;
            }
            (EventKind::StrategyTableUploaded { toml, .. }, None) => {
                self.strategy = StrategyConfig::from_toml_str(toml)?;
            }
            (EventKind::LotteryDrawn { .. }, None) => self.lotteries += 1,
            (event, Some(id)) => {
                let flow = self.flows.get_mut(id).ok_or_else(|| ServiceError::UnknownSubject(id.to_string()))?;
                if rec.subject_seq != Some(flow.events_applied + 1) {
                    return Err(ServiceError::Replay {
                        seq: rec.seq,
                        reason: format!("subject {id} sequence is not gapless"),
                    });
                }
                flow.apply(event)?;
                if matches!(event, EventKind::TreatmentAssigned { .. }) {
                    self.assignments += 1;
                }
            }
            (event, None) => {
                return Err(ServiceError::Replay { seq: rec.seq, reason: format!("{} without a subject", event.name()) })
            }
        }
        Ok(())
    }

    /// Persists then applies one event.
    fn commit(&mut self, subject: Option<&str>, event: EventKind) -> Result<(), ServiceError> {
        let (slot, subject_seq) = match subject {
            Some(id) => match self.flows.get(id) {
                Some(f) => (Some(f.slot), Some(f.events_applied + 1)),
                None => match &event {
                    EventKind::Registered { slot } => (Some(*slot), Some(1)),
                    _ => return Err(ServiceError::UnknownSubject(id.to_string())),
                },
            },
            None => match &event {
                EventKind::SessionStateChanged { slot, .. } => (Some(*slot), None),
                _ => (None, None),
            },
        };
        let rec = EventRecord {
            seq: self.log.len() as u64 + 1,
            timestamp_ms: self.clock.now_ms(),
            slot,
            subject_id: subject.map(str::to_string),
            subject_seq,
            event,
        };
        // validate against a copy first so a rejected event is never persisted
        if let Some(flow) = subject.and_then(|id| self.flows.get(id)) {
            flow.clone().apply(&rec.event)?;
        }
        if let Some(sink) = self.sink.as_mut() {
            sink.append(&rec)?;
        }
        self.apply_record(&rec)?;
        self.log.push(rec);
        Ok(())
    }

    fn set_session_state(&mut self, slot: usize, from: SessionState, to: SessionState) -> Result<(), ServiceError> {
        let state = self.session(slot)?.state;
        if state != from {
            return Err(ServiceError::SessionState { slot, state });
        }
        self.commit(None, EventKind::SessionStateChanged { slot, state: to })
    }

    pub fn open_session(&mut self, slot: usize) -> Result<(), ServiceError> {
        self.set_session_state(slot, SessionState::Scheduled, SessionState::Open)
    }

    pub fn close_session(&mut self, slot: usize) -> Result<(), ServiceError> {
        self.set_session_state(slot, SessionState::Open, SessionState::Closed)
    }

    /// Signs a new subject up for a session that has not closed.
    pub fn register(&mut self, slot: usize) -> Result<String, ServiceError> {
        let state = self.session(slot)?.state;
        if state == SessionState::Closed {
            return Err(ServiceError::SessionState { slot, state });
        }
        let id = format!("S{:04}", self.flows.len() + 1);
        self.commit(Some(&id), EventKind::Registered { slot })?;
        Ok(id)
    }

    fn assignment_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(self.assignments);
        rng
    }

    pub fn assign_treatment(&mut self, subject_id: &str) -> Result<Treatment, ServiceError> {
        let (treatment, seed) = assign_treatment(&mut self.assignment_rng());
        self.assign(subject_id, treatment, seed)?;
        Ok(treatment)
    }

    /// Assigns a chosen arm; the subject seed is still drawn as usual.
    pub fn assign_treatment_as(&mut self, subject_id: &str, treatment: Treatment) -> Result<(), ServiceError> {
        let (_, seed) = assign_treatment(&mut self.assignment_rng());
        self.assign(subject_id, treatment, seed)
    }

    fn assign(&mut self, subject_id: &str, treatment: Treatment, seed: u64) -> Result<(), ServiceError> {
        let flow = self.subject(subject_id)?;
        let event = assignment_event(flow, treatment, seed, self.config.game).map_err(|e| match e {
            FlowError::AlreadyAssigned => ServiceError::DoubleAssignment(subject_id.to_string()),
            e => e.into(),
        })?;
        self.commit(Some(subject_id), event)
    }

    fn require_open(&self, subject_id: &str) -> Result<(), ServiceError> {
        let slot = self.subject(subject_id)?.slot;
        match self.session(slot)?.state {
            SessionState::Open => Ok(()),
            state => Err(ServiceError::SessionState { slot, state }),
        }
    }

    /// Begins (or resumes) a subject's flow, assigning the arm on first call.
    pub fn start(&mut self, subject_id: &str) -> Result<SubjectView, ServiceError> {
        self.require_open(subject_id)?;
        if self.subject(subject_id)?.treatment.is_none() {
            self.assign_treatment(subject_id)?;
        }
        self.view(subject_id)
    }

    /// Applies a submission. With `expected_seq`, the call fails if the
    /// subject's stream has moved on since the client last looked.
    pub fn submit(
        &mut self,
        subject_id: &str,
        submission: &Submission,
        expected_seq: Option<u64>,
    ) -> Result<SubjectView, ServiceError> {
        self.require_open(subject_id)?;
        let flow = self.subject(subject_id)?;
        if let Some(expected) = expected_seq {
            if expected != flow.events_applied {
                return Err(ServiceError::StaleSequence { current: flow.events_applied, expected });
            }
        }
        let events = advance_stage(flow, self.ctx(), submission)?;
        for e in events {
            self.commit(Some(subject_id), e)?;
        }
        self.view(subject_id)
    }

    pub fn submit_send(&mut self, subject_id: &str, amount: f64) -> Result<SubjectView, ServiceError> {
        self.submit(subject_id, &Submission::Send { amount }, None)
    }

    pub fn submit_return(&mut self, subject_id: &str, amount: f64) -> Result<SubjectView, ServiceError> {
        self.submit(subject_id, &Submission::Return { amount }, None)
    }

    pub fn acknowledge_instructions(&mut self, subject_id: &str) -> Result<SubjectView, ServiceError> {
        self.submit(subject_id, &Submission::Instructions, None)
    }

    pub fn submit_time_pref(&mut self, subject_id: &str, answers: Vec<RawAnswer>) -> Result<SubjectView, ServiceError> {
        self.submit(subject_id, &Submission::TimePref { answers }, None)
    }

    pub fn submit_trust(&mut self, subject_id: &str, answers: Vec<RawAnswer>) -> Result<SubjectView, ServiceError> {
        self.submit(subject_id, &Submission::Trust { answers }, None)
    }

    pub fn submit_certainty(
        &mut self,
        subject_id: &str,
        answers: Vec<CertaintyAnswer>,
    ) -> Result<SubjectView, ServiceError> {
        self.submit(subject_id, &Submission::Certainty { answers }, None)
    }

    pub fn submit_demographics(&mut self, subject_id: &str, d: Demographics) -> Result<SubjectView, ServiceError> {
        self.submit(subject_id, &Submission::Demographics { demographics: d }, None)
    }

    pub fn acknowledge_debrief(&mut self, subject_id: &str, suspected_bot: bool) -> Result<SubjectView, ServiceError> {
        self.submit(subject_id, &Submission::Debrief { suspected_bot }, None)
    }

    pub fn view(&self, subject_id: &str) -> Result<SubjectView, ServiceError> {
        let flow = self.subject(subject_id)?;
        let cfg = flow.game.as_ref().map_or(self.config.game, |g| g.config);
        let pending = match flow.stage {
            Stage::Practice | Stage::Game => flow.game.as_ref().and_then(|g| g.pending()).map(|p| PendingView {
                round: p.round_index,
                practice: p.is_practice(),
                role: p.role,
                received: p.sent.filter(|_| p.role == Role::B),
                max_input: match (p.role, p.sent) {
                    (Role::B, Some(x)) => Dollars(x.0 * cfg.multiplier),
                    _ => cfg.max_send(),
                },
            }),
            _ => None,
        };
        let rounds = flow
            .game
            .iter()
            .flat_map(|g| &g.rounds)
            .map(|r| RoundView {
                round: r.round_index,
                practice: r.is_practice,
                role: r.role,
                sent: r.sent,
                tripled: r.tripled,
                returned: r.returned,
                payoff: r.subject_payoff,
            })
            .collect();
        let trust = match flow.stage {
            Stage::Trust => flow.responses.trust_order.iter().filter_map(|id| self.bank.trust_question(*id).cloned()).collect(),
            _ => Vec::new(),
        };
        let certainty = match flow.stage {
            Stage::Certainty => self
                .bank
                .certainty
                .horizons_years
                .iter()
                .map(|y| CertaintyPrompt {
                    horizon_years: *y,
                    agreement: self.bank.certainty.agreement_prompt(*y),
                    certainty: self.bank.certainty.certainty_text.clone(),
                })
                .collect(),
            _ => Vec::new(),
        };
        let debrief = match (flow.stage, flow.treatment) {
            (Stage::Debrief | Stage::Done, Some(t)) => Some(DebriefView { treatment: t, text: DEBRIEF_TEXT.to_string() }),
            _ => None,
        };
        Ok(SubjectView {
            subject_id: flow.subject_id.clone(),
            session: flow.slot,
            stage: flow.stage,
            seq: flow.events_applied,
            endowment: cfg.endowment,
            multiplier: cfg.multiplier,
            pending,
            rounds,
            cumulative_payoff: flow.cumulative_payoff(),
            wait_ms: flow.last_wait_ms,
            time_pref: if flow.stage == Stage::TimePref { flow.responses.time_pref_presented.clone() } else { vec![] },
            trust,
            certainty,
            debrief,
        })
    }

    pub fn export(&self) -> Result<ExportTables, ServiceError> {
        Ok(export_dataset(self.flows.values())?)
    }

    pub fn export_to(&self, dir: &Path) -> Result<ExportSummary, ServiceError> {
        let tables = self.export()?;
        tables.write_to(dir)?;
        Ok(summary(&tables))
    }

    /// Draws the reward among finished subjects and records the result.
    pub fn draw_lottery(&mut self) -> Result<LotteryDraw, ServiceError> {
        let eligible: Vec<LotteryEntry> = self
            .flows
            .values()
            .filter(|f| f.is_done())
            .map(|f| LotteryEntry { subject_id: f.subject_id.clone(), payoff: f.cumulative_payoff() })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ LOTTERY_SALT);
        rng.set_stream(self.lotteries);
        let draw = draw_lottery(eligible, &mut rng)?;
        self.commit(
            None,
            EventKind::LotteryDrawn {
                ordinal: self.lotteries + 1,
                winner: draw.winner.clone(),
                payoff: draw.winner_payoff,
                reward: draw.reward,
                eligible: draw.eligible.len(),
            },
        )?;
        Ok(draw)
    }

    /// Replaces both strategy tables after validation; later bot draws carry
    /// the new version.
    pub fn upload_strategy_table(&mut self, toml_text: &str) -> Result<String, ServiceError> {
        let parsed = StrategyConfig::from_toml_str(toml_text)?;
        let version = parsed.version().to_string();
        self.commit(None, EventKind::StrategyTableUploaded { version: version.clone(), toml: toml_text.to_string() })?;
        Ok(version)
    }
}

pub fn summary(tables: &ExportTables) -> ExportSummary {
    let [trust_rows, discount_rows, certainty_rows] = tables.row_counts();
    ExportSummary { subjects: tables.subjects, trust_rows, discount_rows, certainty_rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::events::LogicalClock;

    fn service() -> ExperimentService {
        ExperimentService::new(ServiceConfig::default(), StrategyConfig::shipped(), QuestionBank::shipped())
            .unwrap()
            .with_clock(LogicalClock::default())
    }

    #[test]
    fn default_config_has_seven_slots() {
        let cfg = ServiceConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.slot_times.len(), 7);
    }

    #[test]
    fn overlapping_or_malformed_slots_are_rejected() {
        let mut cfg = ServiceConfig { slot_times: vec!["10:00".into(), "11:00".into()], ..ServiceConfig::default() };
        assert!(matches!(cfg.validate(), Err(ServiceError::InvalidConfig(m)) if m.contains("overlaps")));
        cfg.slot_times = vec!["25:00".into()];
        assert!(cfg.validate().is_err());
        cfg.slot_times = vec![];
        assert!(cfg.validate().is_err());
        cfg.slot_times = vec!["09:00".into()];
        cfg.validate().unwrap();
    }

    #[test]
    fn six_slots_are_fine_too() {
        let mut cfg = ServiceConfig::default();
        cfg.slot_times.pop();
        let svc = ExperimentService::new(cfg, StrategyConfig::shipped(), QuestionBank::shipped()).unwrap();
        assert_eq!(svc.sessions().len(), 6);
    }

    #[test]
    fn registration_and_assignment() {
        let mut svc = service();
        let id = svc.register(2).unwrap();
        assert_eq!(svc.sessions()[2].roster, vec![id.clone()]);
        assert!(matches!(svc.register(9), Err(ServiceError::UnknownSession(9))));
        svc.assign_treatment(&id).unwrap();
        assert!(matches!(svc.assign_treatment(&id), Err(ServiceError::DoubleAssignment(_))));
        assert!(matches!(svc.assign_treatment("nobody"), Err(ServiceError::UnknownSubject(_))));
    }

    #[test]
    fn start_requires_open_session() {
        let mut svc = service();
        let id = svc.register(0).unwrap();
        assert!(matches!(svc.start(&id), Err(ServiceError::SessionState { state: SessionState::Scheduled, .. })));
        svc.open_session(0).unwrap();
        let view = svc.start(&id).unwrap();
        assert_eq!(view.stage, Stage::Instructions);
        assert!(view.debrief.is_none());
        svc.close_session(0).unwrap();
        assert!(matches!(svc.register(0), Err(ServiceError::SessionState { state: SessionState::Closed, .. })));
    }

    #[test]
    fn treatment_is_persisted_before_any_bot_draw() {
        let mut svc = service();
        svc.open_session(0).unwrap();
        let id = svc.register(0).unwrap();
        svc.start(&id).unwrap();
        svc.acknowledge_instructions(&id).unwrap();
        let kinds: Vec<&str> = svc.events().iter().map(|r| r.event.name()).collect();
        let assigned = kinds.iter().position(|k| *k == "treatment_assigned").unwrap();
        let first_send = kinds.iter().position(|k| *k == "send").unwrap();
        assert!(assigned < first_send);
    }

    #[test]
    fn stale_sequence_is_rejected() {
        let mut svc = service();
        svc.open_session(0).unwrap();
        let id = svc.register(0).unwrap();
        let v = svc.start(&id).unwrap();
        svc.submit(&id, &Submission::Instructions, Some(v.seq)).unwrap();
        let err = svc.submit(&id, &Submission::Instructions, Some(v.seq)).unwrap_err();
        assert!(matches!(err, ServiceError::StaleSequence { .. }));
    }

    #[test]
    fn pending_view_bounds() {
        let mut svc = service();
        svc.open_session(0).unwrap();
        let id = svc.register(0).unwrap();
        svc.start(&id).unwrap();
        let v = svc.acknowledge_instructions(&id).unwrap();
        let p = v.pending.unwrap();
        assert!(p.practice);
        assert_eq!((p.role, p.received, p.max_input), (Role::B, Some(Dollars(5)), Dollars(15)));
        let v = svc.submit_return(&id, 5.0).unwrap();
        assert_eq!(v.stage, Stage::Game);
        let p = v.pending.unwrap();
        assert_eq!((p.round, p.role, p.max_input), (1, Role::A, Dollars(10)));
        assert_eq!(v.cumulative_payoff, Dollars(0));
    }

    #[test]
    fn lottery_needs_finished_subjects() {
        let mut svc = service();
        assert!(matches!(svc.draw_lottery(), Err(ServiceError::Lottery(LotteryError::NoEligibleSubjects))));
    }

    #[test]
    fn strategy_upload_is_validated_and_logged() {
        let mut svc = service();
        assert!(svc.upload_strategy_table("version = 3").is_err());
        let text = StrategyConfig::shipped().to_toml_string().replace("default-v1", "v2");
        assert_eq!(svc.upload_strategy_table(&text).unwrap(), "v2");
        assert_eq!(svc.strategy().version(), "v2");
        assert_eq!(svc.events().last().unwrap().event.name(), "strategy_table_uploaded");
    }

    #[test]
    fn assignment_balance() {
        let mut heads = 0;
        let n = 100_000;
        for k in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            rng.set_stream(k);
            if assign_treatment(&mut rng).0 == Treatment::HighTrust {
                heads += 1;
            }
        }
        let frac = heads as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.005, "{frac}");
    }
}
