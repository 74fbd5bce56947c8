//! The per-subject state machine.
//!
//! [`SubjectFlow`] is a fold over [`EventKind`]s. [`advance_stage`] is the
//! only place that decides which events a submission produces, including the
//! counterpart's moves, so a flow rebuilt from its log is identical to the
//! live one.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bot::{BotError, StrategyConfig, Treatment};
use crate::game::{Dollars, GameConfig, GameError, GameEvent, MatchState, Role};
use crate::questionnaire::{
    CertaintyAnswer, Demographics, QuestionBank, RawAnswer, ResponseError, ResponseSet,
};

use super::events::EventKind;

const TIME_PREF_SALT: u64 = 0x7469_6d65_7072_6566;
const TRUST_SALT: u64 = 0x7472_7573_7430_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Instructions,
    Practice,
    Game,
    TimePref,
    Trust,
    Certainty,
    Demographics,
    Debrief,
    Done,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Instructions,
        Stage::Practice,
        Stage::Game,
        Stage::TimePref,
        Stage::Trust,
        Stage::Certainty,
        Stage::Demographics,
        Stage::Debrief,
        Stage::Done,
    ];

    pub fn next(self) -> Option<Stage> {
        Stage::ALL.get(self as usize + 1).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Stage::Instructions => "instructions",
            Stage::Practice => "practice",
            Stage::Game => "game",
            Stage::TimePref => "time_pref",
            Stage::Trust => "trust",
            Stage::Certainty => "certainty",
            Stage::Demographics => "demographics",
            Stage::Debrief => "debrief",
            Stage::Done => "done",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Who made a game move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Subject,
    Bot,
}

/// Artificial "the other participant is deciding" delay attached to every
/// counterpart move, drawn uniformly from `min_ms..=max_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaitDelay {
    pub min_ms: u64,
    pub max_ms: u64,
}

impl Default for WaitDelay {
    fn default() -> Self {
        WaitDelay { min_ms: 3_000, max_ms: 8_000 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("no treatment has been assigned yet")]
    NotAssigned,
    #[error("treatment is already assigned")]
    AlreadyAssigned,
    #[error("a {submitted} submission is not accepted at stage {current}")]
    WrongStage { submitted: &'static str, current: Stage },
    #[error("the subject does not {0} in this round")]
    NotYourMove(&'static str),
    #[error("cannot move from stage {from} to {to}")]
    StageOrder { from: Stage, to: Stage },
    #[error("event {0} does not fit the flow")]
    Inconsistent(&'static str),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Bot(#[from] BotError),
    #[error(transparent)]
    Response(#[from] ResponseError),
}

/// What a subject hands in to finish (part of) the current stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Submission {
    Instructions,
    Send { amount: f64 },
    Return { amount: f64 },
    TimePref { answers: Vec<RawAnswer> },
    Trust { answers: Vec<RawAnswer> },
    Certainty { answers: Vec<CertaintyAnswer> },
    Demographics { demographics: Demographics },
    Debrief { suspected_bot: bool },
}

impl Submission {
    pub fn name(&self) -> &'static str {
        match self {
            Submission::Instructions => "instructions",
            Submission::Send { .. } => "send",
            Submission::Return { .. } => "return",
            Submission::TimePref { .. } => "time_pref",
            Submission::Trust { .. } => "trust",
            Submission::Certainty { .. } => "certainty",
            Submission::Demographics { .. } => "demographics",
            Submission::Debrief { .. } => "debrief",
        }
    }
}

/// Read-only inputs needed to decide a transition.
#[derive(Debug, Clone, Copy)]
pub struct FlowContext<'a> {
    pub strategy: &'a StrategyConfig,
    pub bank: &'a QuestionBank,
    pub wait: WaitDelay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectFlow {
    pub subject_id: String,
    pub slot: usize,
    pub treatment: Option<Treatment>,
    pub seed: Option<u64>,
    pub stage: Stage,
    pub game: Option<MatchState>,
    pub responses: ResponseSet,
    pub suspected_bot: bool,
    /// Delay attached to the most recent counterpart move.
    pub last_wait_ms: Option<u64>,
    /// Number of events folded in, including the registration.
    pub events_applied: u64,
}

impl SubjectFlow {
    pub fn registered(subject_id: impl Into<String>, slot: usize) -> SubjectFlow {
        SubjectFlow {
            subject_id: subject_id.into(),
            slot,
            treatment: None,
            seed: None,
            stage: Stage::Instructions,
            game: None,
            responses: ResponseSet::default(),
            suspected_bot: false,
            last_wait_ms: None,
            events_applied: 1,
        }
    }

    /// Rebuilds a flow from its own events, the first being the registration.
    pub fn replay<'a>(
        subject_id: impl Into<String>,
        events: impl IntoIterator<Item = &'a EventKind>,
    ) -> Result<SubjectFlow, FlowError> {
        let mut events = events.into_iter();
        let Some(EventKind::Registered { slot }) = events.next() else {
            return Err(FlowError::Inconsistent("first event must be a registration"));
        };
        let mut flow = SubjectFlow::registered(subject_id, *slot);
        for e in events {
            flow.apply(e)?;
        }
        Ok(flow)
    }

    pub fn is_done(&self) -> bool {
        self.stage == Stage::Done
    }

    pub fn cumulative_payoff(&self) -> Dollars {
        self.game.as_ref().map_or(Dollars::ZERO, |g| g.cumulative_payoff)
    }

    fn game_mut(&mut self) -> Result<&mut MatchState, FlowError> {
        self.game.as_mut().ok_or(FlowError::NotAssigned)
    }

    fn expect_stage(&self, stage: Stage, what: &'static str) -> Result<(), FlowError> {
        if self.stage == stage {
            Ok(())
        } else {
            Err(FlowError::Inconsistent(what))
        }
    }

    /// Folds one event into the flow.
    pub fn apply(&mut self, event: &EventKind) -> Result<(), FlowError> {
        match event {
            EventKind::TreatmentAssigned { treatment, seed, game } => {
                if self.treatment.is_some() {
                    return Err(FlowError::AlreadyAssigned);
                }
                self.game = Some(MatchState::new(*treatment, *game, *seed)?);
                self.treatment = Some(*treatment);
                self.seed = Some(*seed);
            }
            EventKind::StageAdvanced { from, to } => {
                if *from != self.stage || Some(*to) != self.stage.next() {
                    return Err(FlowError::StageOrder { from: self.stage, to: *to });
                }
                self.stage = *to;
            }
            EventKind::Send { round, amount, by, wait_ms, .. } => {
                self.check_mover(*round, *by, Role::A)?;
                self.game_mut()?.apply(&GameEvent::Send { round: *round, amount: *amount })?;
                if *by == Actor::Bot {
                    self.last_wait_ms = *wait_ms;
                }
            }
            EventKind::Return { round, amount, by, wait_ms, .. } => {
                self.check_mover(*round, *by, Role::B)?;
                self.game_mut()?.apply(&GameEvent::Return { round: *round, amount: *amount })?;
                if *by == Actor::Bot {
                    self.last_wait_ms = *wait_ms;
                }
            }
            EventKind::TimePrefPresented { items } => {
                self.expect_stage(Stage::TimePref, "time_pref_presented")?;
                self.responses.time_pref_presented = items.clone();
            }
            EventKind::TimePrefAnswered { items } => {
                self.expect_stage(Stage::TimePref, "time_pref_answered")?;
                self.responses.time_pref = items.clone();
            }
            EventKind::TrustPresented { order } => {
                self.expect_stage(Stage::Trust, "trust_presented")?;
                self.responses.trust_order = order.clone();
            }
            EventKind::TrustAnswered { items } => {
                self.expect_stage(Stage::Trust, "trust_answered")?;
                self.responses.trust = items.clone();
            }
            EventKind::CertaintyAnswered { items } => {
                self.expect_stage(Stage::Certainty, "certainty_answered")?;
                self.responses.certainty = items.clone();
            }
            EventKind::DemographicsAnswered { demographics } => {
                self.expect_stage(Stage::Demographics, "demographics_answered")?;
                self.responses.demographics = Some(*demographics);
            }
            EventKind::DebriefAcknowledged { suspected_bot } => {
                self.expect_stage(Stage::Debrief, "debrief_acknowledged")?;
                self.suspected_bot = *suspected_bot;
            }
            EventKind::Registered { .. }
            | EventKind::SessionStateChanged { .. }
            | EventKind::StrategyTableUploaded { .. }
            | EventKind::LotteryDrawn { .. } => return Err(FlowError::Inconsistent(event.name())),
        }
        self.events_applied += 1;
        Ok(())
    }

    /// A move by `by` in the seat `seat` of round `round` must match the
    /// subject's role that round.
    fn check_mover(&self, round: u32, by: Actor, seat: Role) -> Result<(), FlowError> {
        if !matches!(self.stage, Stage::Practice | Stage::Game) {
            return Err(FlowError::Inconsistent("game move outside the game stages"));
        }
        let game = self.game.as_ref().ok_or(FlowError::NotAssigned)?;
        let pending = game.pending().ok_or(GameError::MatchComplete)?;
        if pending.round_index != round {
            return Err(GameError::RoundMismatch { expected: pending.round_index, got: round }.into());
        }
        if (self.stage == Stage::Practice) != pending.is_practice() {
            return Err(FlowError::Inconsistent("practice round outside the practice stage"));
        }
        let subject_moves = pending.role == seat;
        if subject_moves != (by == Actor::Subject) {
            return Err(FlowError::Inconsistent("move by the wrong participant"));
        }
        Ok(())
    }
}

/// Collects events while keeping a scratch copy of the flow up to date.
struct Emitter<'a> {
    flow: SubjectFlow,
    ctx: FlowContext<'a>,
    out: Vec<EventKind>,
}

impl Emitter<'_> {
    fn emit(&mut self, event: EventKind) -> Result<(), FlowError> {
        self.flow.apply(&event)?;
        self.out.push(event);
        Ok(())
    }

    fn advance(&mut self) -> Result<(), FlowError> {
        let from = self.flow.stage;
        let to = from.next().ok_or(FlowError::StageOrder { from, to: from })?;
        self.emit(EventKind::StageAdvanced { from, to })?;
        let seed = self.flow.seed.ok_or(FlowError::NotAssigned)?;
        match to {
            Stage::TimePref => {
                let items = self.ctx.bank.build_time_pref_sequence(seed ^ TIME_PREF_SALT);
                self.emit(EventKind::TimePrefPresented { items })
            }
            Stage::Trust => {
                let order = self.ctx.bank.build_trust_sequence(seed ^ TRUST_SALT);
                self.emit(EventKind::TrustPresented { order })
            }
            _ => Ok(()),
        }
    }

    fn bot_rng(&self, round: u32, stream: u64) -> Result<ChaCha8Rng, FlowError> {
        let seed = self.flow.seed.ok_or(FlowError::NotAssigned)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(round) * 2 + stream);
        Ok(rng)
    }

    fn wait(&self, rng: &mut ChaCha8Rng) -> u64 {
        let WaitDelay { min_ms, max_ms } = self.ctx.wait;
        rng.random_range(min_ms..=max_ms.max(min_ms))
    }

    fn treatment(&self) -> Result<Treatment, FlowError> {
        self.flow.treatment.ok_or(FlowError::NotAssigned)
    }

    /// Plays every counterpart move that is due and moves past finished game
    /// stages.
    fn settle(&mut self) -> Result<(), FlowError> {
        loop {
            let stage = self.flow.stage;
            if !matches!(stage, Stage::Practice | Stage::Game) {
                return Ok(());
            }
            let game = self.flow.game.as_ref().ok_or(FlowError::NotAssigned)?;
            let practice_over = stage == Stage::Practice && game.practice_done();
            let pending = game.pending();
            match pending {
                _ if practice_over => self.advance()?,
                None => self.advance()?,
                Some(p) if p.role == Role::B && p.sent.is_none() => {
                    let table = self.ctx.strategy.table(self.treatment()?);
                    let mut rng = self.bot_rng(p.round_index, 0)?;
                    let amount = table.bot_send(p.round_index, &mut rng)?;
                    let wait_ms = self.wait(&mut rng);
                    self.emit(EventKind::Send {
                        round: p.round_index,
                        amount,
                        by: Actor::Bot,
                        table_version: Some(self.ctx.strategy.version().to_string()),
                        wait_ms: Some(wait_ms),
                    })?;
                }
                Some(_) => return Ok(()),
            }
        }
    }

    fn require(&self, stage: Stage, submission: &Submission) -> Result<(), FlowError> {
        if self.flow.stage == stage {
            Ok(())
        } else {
            Err(FlowError::WrongStage { submitted: submission.name(), current: self.flow.stage })
        }
    }

    fn submit(&mut self, submission: &Submission) -> Result<(), FlowError> {
        let bank = self.ctx.bank;
        match submission {
            Submission::Instructions => {
                self.require(Stage::Instructions, submission)?;
                self.treatment()?;
                self.advance()?;
            }
            Submission::Send { amount } => {
                let pending = self.pending_game_round(submission)?;
                if pending.role != Role::A {
                    return Err(FlowError::NotYourMove("send"));
                }
                let x = Dollars::from_input(*amount)?;
                self.emit(EventKind::Send {
                    round: pending.round_index,
                    amount: x,
                    by: Actor::Subject,
                    table_version: None,
                    wait_ms: None,
                })?;
                let table = self.ctx.strategy.table(self.treatment()?);
                let mut rng = self.bot_rng(pending.round_index, 1)?;
                let y = table.bot_return(x, &mut rng)?;
                let wait_ms = self.wait(&mut rng);
                self.emit(EventKind::Return {
                    round: pending.round_index,
                    amount: y,
                    by: Actor::Bot,
                    table_version: Some(self.ctx.strategy.version().to_string()),
                    wait_ms: Some(wait_ms),
                })?;
            }
            Submission::Return { amount } => {
                let pending = self.pending_game_round(submission)?;
                if pending.role != Role::B || pending.sent.is_none() {
                    return Err(FlowError::NotYourMove("return"));
                }
                let y = Dollars::from_input(*amount)?;
                self.emit(EventKind::Return {
                    round: pending.round_index,
                    amount: y,
                    by: Actor::Subject,
                    table_version: None,
                    wait_ms: None,
                })?;
            }
            Submission::TimePref { answers } => {
                self.require(Stage::TimePref, submission)?;
                let items = bank.record_time_pref(&self.flow.responses.time_pref_presented, answers)?;
                self.emit(EventKind::TimePrefAnswered { items })?;
                self.advance()?;
            }
            Submission::Trust { answers } => {
                self.require(Stage::Trust, submission)?;
                let items = bank.record_trust(&self.flow.responses.trust_order, answers)?;
                self.emit(EventKind::TrustAnswered { items })?;
                self.advance()?;
            }
            Submission::Certainty { answers } => {
                self.require(Stage::Certainty, submission)?;
                let items = bank.record_certainty(answers)?;
                self.emit(EventKind::CertaintyAnswered { items })?;
                self.advance()?;
            }
            Submission::Demographics { demographics } => {
                self.require(Stage::Demographics, submission)?;
                self.emit(EventKind::DemographicsAnswered { demographics: *demographics })?;
                self.advance()?;
            }
            Submission::Debrief { suspected_bot } => {
                self.require(Stage::Debrief, submission)?;
                self.emit(EventKind::DebriefAcknowledged { suspected_bot: *suspected_bot })?;
                self.advance()?;
            }
        }
        self.settle()
    }

    fn pending_game_round(&self, submission: &Submission) -> Result<crate::game::PendingRound, FlowError> {
        if !matches!(self.flow.stage, Stage::Practice | Stage::Game) {
            return Err(FlowError::WrongStage { submitted: submission.name(), current: self.flow.stage });
        }
        let game = self.flow.game.as_ref().ok_or(FlowError::NotAssigned)?;
        Ok(game.pending().ok_or(GameError::MatchComplete)?)
    }
}

/// Events produced by `submission`, or why it is rejected. The flow itself
/// is not modified.
pub fn advance_stage(
    flow: &SubjectFlow,
    ctx: FlowContext<'_>,
    submission: &Submission,
) -> Result<Vec<EventKind>, FlowError> {
    let mut em = Emitter { flow: flow.clone(), ctx, out: Vec::new() };
    em.submit(submission)?;
    Ok(em.out)
}

/// Event that assigns `treatment` to a flow that has none yet.
pub fn assignment_event(
    flow: &SubjectFlow,
    treatment: Treatment,
    seed: u64,
    game: GameConfig,
) -> Result<EventKind, FlowError> {
    if flow.treatment.is_some() {
        return Err(FlowError::AlreadyAssigned);
    }
    game.validate()?;
    Ok(EventKind::TreatmentAssigned { treatment, seed, game })
}
