//! The repeated trust game as an explicit state machine.
//!
//! A match is one practice round (subject plays B) followed by the scored
//! rounds, where the subject plays A in odd rounds and B in even rounds.
//! Whoever plays A sends `x` out of the endowment, the transfer is multiplied,
//! and B returns any whole amount `y` in `0..=multiplier * x`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bot::Treatment;

/// Whole-dollar amount. Transfers are never fractional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dollars(pub u32);

impl Dollars {
    pub const ZERO: Dollars = Dollars(0);

    pub fn get(self) -> u32 {
        self.0
    }

    /// Converts an amount typed at an input boundary (form field, JSON number).
    pub fn from_input(value: f64) -> Result<Dollars, GameError> {
        if !value.is_finite() || value.fract() != 0.0 {
            return Err(GameError::NonInteger(value));
        }
        if value < 0.0 {
            return Err(GameError::Negative(value));
        }
        if value > u32::MAX as f64 {
            return Err(GameError::NonInteger(value));
        }
        Ok(Dollars(value as u32))
    }
}

impl fmt::Display for Dollars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("${}", self.0))
    }
}

impl From<u32> for Dollars {
    fn from(v: u32) -> Self {
        Dollars(v)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("amount {0} is not a whole number of dollars")]
    NonInteger(f64),
    #[error("amount {0} is negative")]
    Negative(f64),
    #[error("send of {sent} exceeds the endowment of {endowment}")]
    SendExceedsEndowment { sent: Dollars, endowment: Dollars },
    #[error("return of {returned} exceeds the multiplied transfer of {available}")]
    ReturnExceedsAvailable { returned: Dollars, available: Dollars },
    #[error("the match is complete, no round is pending")]
    MatchComplete,
    #[error("round {0} already has a send and is waiting for the return")]
    AwaitingReturn(u32),
    #[error("round {0} has no send recorded yet")]
    NoSendRecorded(u32),
    #[error("round {index} is beyond the last round {last}")]
    RoundOutOfRange { index: u32, last: u32 },
    #[error("event for round {got} does not match pending round {expected}")]
    RoundMismatch { expected: u32, got: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameConfig {
    pub endowment: Dollars,
    pub multiplier: u32,
    pub scored_rounds: u32,
    pub practice_rounds: u32,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            endowment: Dollars(10),
            multiplier: 3,
            scored_rounds: 11,
            practice_rounds: 1,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.endowment.0 == 0 {
            return Err(GameError::InvalidConfig("endowment must be positive".into()));
        }
        if self.multiplier < 1 {
            return Err(GameError::InvalidConfig("multiplier must be at least 1".into()));
        }
        if self.scored_rounds < 1 {
            return Err(GameError::InvalidConfig("at least one scored round is required".into()));
        }
        // Round index 0 is reserved for the practice round.
        if self.practice_rounds > 1 {
            return Err(GameError::InvalidConfig("at most one practice round is supported".into()));
        }
        Ok(())
    }

    pub fn max_send(&self) -> Dollars {
        self.endowment
    }

    pub fn total_rounds(&self) -> u32 {
        self.practice_rounds + self.scored_rounds
    }

    /// The subject's role in a round. Index 0 is the practice round.
    pub fn role_for_round(&self, round_index: u32) -> Result<Role, GameError> {
        if round_index > self.scored_rounds {
            return Err(GameError::RoundOutOfRange { index: round_index, last: self.scored_rounds });
        }
        Ok(match round_index {
            0 => Role::B,
            r if r % 2 == 1 => Role::A,
            _ => Role::B,
        })
    }

    fn first_round_index(&self) -> u32 {
        if self.practice_rounds == 1 {
            0
        } else {
            1
        }
    }
}

/// The subject's seat in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u32,
    pub role: Role,
    pub sent: Dollars,
    pub tripled: Dollars,
    pub returned: Dollars,
    pub subject_payoff: Dollars,
    pub counterpart_payoff: Dollars,
    pub is_practice: bool,
}

/// The round the match is waiting on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingRound {
    pub round_index: u32,
    pub role: Role,
    /// `Some` once A has sent; the round then waits for B's return.
    pub sent: Option<Dollars>,
}

impl PendingRound {
    pub fn is_practice(&self) -> bool {
        self.round_index == 0
    }
}

/// Transition applied to a match. A match is fully determined by its
/// treatment, config, seed and the ordered list of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum GameEvent {
    Send { round: u32, amount: Dollars },
    Return { round: u32, amount: Dollars },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchState {
    pub treatment: Treatment,
    pub config: GameConfig,
    pub rounds: Vec<RoundRecord>,
    pub cumulative_payoff: Dollars,
    pub rng_seed: u64,
    in_flight: Option<Dollars>,
}

impl MatchState {
    pub fn new(treatment: Treatment, config: GameConfig, seed: u64) -> Result<MatchState, GameError> {
        config.validate()?;
        Ok(MatchState {
            treatment,
            config,
            rounds: Vec::new(),
            cumulative_payoff: Dollars::ZERO,
            rng_seed: seed,
            in_flight: None,
        })
    }

    pub fn replay<'a>(
        treatment: Treatment,
        config: GameConfig,
        seed: u64,
        events: impl IntoIterator<Item = &'a GameEvent>,
    ) -> Result<MatchState, GameError> {
        let mut state = MatchState::new(treatment, config, seed)?;
        for event in events {
            state.apply(event)?;
        }
        Ok(state)
    }

    pub fn apply(&mut self, event: &GameEvent) -> Result<(), GameError> {
        let round = match *event {
            GameEvent::Send { round, .. } | GameEvent::Return { round, .. } => round,
        };
        let pending = self.pending().ok_or(GameError::MatchComplete)?;
        if pending.round_index != round {
            return Err(GameError::RoundMismatch { expected: pending.round_index, got: round });
        }
        match *event {
            GameEvent::Send { amount, .. } => self.apply_send(amount),
            GameEvent::Return { amount, .. } => self.apply_return(amount),
        }
    }

    pub fn pending(&self) -> Option<PendingRound> {
        let played = self.rounds.len() as u32;
        if played >= self.config.total_rounds() {
            return None;
        }
        let round_index = self.config.first_round_index() + played;
        let role = self.config.role_for_round(round_index).ok()?;
        Some(PendingRound { round_index, role, sent: self.in_flight })
    }

    pub fn is_complete(&self) -> bool {
        self.pending().is_none()
    }

    /// Practice rounds closed so far.
    pub fn practice_done(&self) -> bool {
        self.rounds.iter().filter(|r| r.is_practice).count() as u32 == self.config.practice_rounds
    }

    /// Records A's transfer for the pending round.
    pub fn apply_send(&mut self, x: Dollars) -> Result<(), GameError> {
        let pending = self.pending().ok_or(GameError::MatchComplete)?;
        if pending.sent.is_some() {
            return Err(GameError::AwaitingReturn(pending.round_index));
        }
        if x > self.config.max_send() {
            return Err(GameError::SendExceedsEndowment { sent: x, endowment: self.config.endowment });
        }
        self.in_flight = Some(x);
        Ok(())
    }

    /// Records B's return, settles payoffs and closes the round.
    pub fn apply_return(&mut self, y: Dollars) -> Result<(), GameError> {
        let pending = self.pending().ok_or(GameError::MatchComplete)?;
        let x = pending.sent.ok_or(GameError::NoSendRecorded(pending.round_index))?;
        let tripled = Dollars(x.0 * self.config.multiplier);
        if y > tripled {
            return Err(GameError::ReturnExceedsAvailable { returned: y, available: tripled });
        }
        let a_payoff = Dollars(self.config.endowment.0 - x.0 + y.0);
        let b_payoff = Dollars(tripled.0 - y.0);
        let (subject_payoff, counterpart_payoff) = match pending.role {
            Role::A => (a_payoff, b_payoff),
            Role::B => (b_payoff, a_payoff),
        };
        let is_practice = pending.is_practice();
        self.rounds.push(RoundRecord {
            round_index: pending.round_index,
            role: pending.role,
            sent: x,
            tripled,
            returned: y,
            subject_payoff,
            counterpart_payoff,
            is_practice,
        });
        if !is_practice {
            self.cumulative_payoff = Dollars(self.cumulative_payoff.0 + subject_payoff.0);
        }
        self.in_flight = None;
        Ok(())
    }

    pub fn scored_rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        self.rounds.iter().filter(|r| !r.is_practice)
    }
}
