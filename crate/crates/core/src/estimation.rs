//! Per-subject measures: block discount factors, their mean, certainty scores.
//!
//! Under linear utility a subject indifferent between `p` today and `m` in `t`
//! weeks has weekly discount factor `D = (p / m)^(1/t)`. Each block pairs two
//! questions that share `(p, m)` and differ only in delay, so the switch point
//! (if any) brackets the indifference delay.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Dollars;
use crate::questionnaire::{CertaintyItem, Choice, TimePrefItem, CERTAINTY_SLIDER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("time-preference grid is incomplete: expected {expected} answers, got {got}")]
    IncompleteGrid { expected: usize, got: usize },
    #[error("no answer for m = {m}, t = {t_weeks} weeks")]
    MissingCell { m: Dollars, t_weeks: u32 },
    #[error("m = {m}: present value differs between {t_short} and {t_long} weeks")]
    UnsharedPresentValue { m: Dollars, t_short: u32, t_long: u32 },
    #[error("expected {expected} discount estimates, got {got}")]
    WrongEstimateCount { expected: usize, got: usize },
    #[error("expected {expected} certainty blocks, got {got}")]
    WrongCertaintyCount { expected: usize, got: usize },
    #[error("certainty {0} outside 0..=100")]
    CertaintyOutOfRange(i32),
}

/// Number of blocks per subject: three future values times two delay pairs.
pub const BLOCKS_PER_SUBJECT: usize = 6;
pub const CERTAINTY_BLOCKS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceBlock {
    /// 1-based, ordered by `m` then by delay pair.
    pub block_id: u8,
    pub m: Dollars,
    pub p: Dollars,
    pub t_short: u32,
    pub t_long: u32,
    pub choice_short: Choice,
    pub choice_long: Choice,
}

/// Choices at the short and long delay, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    FF,
    FP,
    PP,
    /// Present at the short delay but Future at the long one.
    PF,
}

impl Pattern {
    pub fn of(short: Choice, long: Choice) -> Pattern {
        match (short, long) {
            (Choice::Future, Choice::Future) => Pattern::FF,
            (Choice::Future, Choice::Present) => Pattern::FP,
            (Choice::Present, Choice::Present) => Pattern::PP,
            (Choice::Present, Choice::Future) => Pattern::PF,
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    None,
    /// Never switched to Present: the subject is at least this patient.
    UpperCensored,
    /// Always chose Present: the subject is at most this patient.
    LowerCensored,
}

impl Censoring {
    pub fn code(self) -> &'static str {
        match self {
            Censoring::None => "none",
            Censoring::UpperCensored => "upper",
            Censoring::LowerCensored => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountRateEstimate {
    pub block_id: u8,
    pub m: Dollars,
    pub p: Dollars,
    /// Delay the factor is attributed to.
    pub t_weeks: u32,
    /// Weekly discount factor.
    pub d: f64,
    pub censoring: Censoring,
    pub pattern: Pattern,
}

impl DiscountRateEstimate {
    pub fn non_monotone(&self) -> bool {
        self.pattern == Pattern::PF
    }
}

/// Pairs the twelve answers into the six blocks.
pub fn blocks_from_responses(items: &[TimePrefItem]) -> Result<Vec<ChoiceBlock>, EstimationError> {
    let expected = BLOCKS_PER_SUBJECT * 2;
    if items.len() != expected {
        return Err(EstimationError::IncompleteGrid { expected, got: items.len() });
    }
    let mut ms: Vec<Dollars> = items.iter().map(|i| i.cell.m).collect();
    ms.sort_unstable();
    ms.dedup();
    let mut delays: Vec<u32> = items.iter().map(|i| i.cell.t_weeks).collect();
    delays.sort_unstable();
    delays.dedup();

    let find = |m: Dollars, t: u32| {
        items
            .iter()
            .find(|i| i.cell.m == m && i.cell.t_weeks == t)
            .ok_or(EstimationError::MissingCell { m, t_weeks: t })
    };

    let mut blocks = Vec::with_capacity(BLOCKS_PER_SUBJECT);
    for m in &ms {
        for pair in delays.chunks(2) {
            let &[t_short, t_long] = pair else {
                return Err(EstimationError::MissingCell { m: *m, t_weeks: pair[0] + 1 });
            };
            let short = find(*m, t_short)?;
            let long = find(*m, t_long)?;
            if short.cell.p != long.cell.p {
                return Err(EstimationError::UnsharedPresentValue { m: *m, t_short, t_long });
            }
            blocks.push(ChoiceBlock {
                block_id: blocks.len() as u8 + 1,
                m: *m,
                p: short.cell.p,
                t_short,
                t_long,
                choice_short: short.choice,
                choice_long: long.choice,
            });
        }
    }
    if blocks.len() != BLOCKS_PER_SUBJECT {
        return Err(EstimationError::IncompleteGrid { expected, got: blocks.len() * 2 });
    }
    Ok(blocks)
}

/// Inverts `p = D^t * m` at the delay implied by the block's pattern.
pub fn block_discount_rate(block: &ChoiceBlock) -> DiscountRateEstimate {
    let ratio = block.p.0 as f64 / block.m.0 as f64;
    let pattern = Pattern::of(block.choice_short, block.choice_long);
    let (t_weeks, censoring) = match pattern {
        Pattern::FF => (block.t_long, Censoring::UpperCensored),
        Pattern::FP => (block.t_short, Censoring::None),
        Pattern::PP => (block.t_short, Censoring::LowerCensored),
        Pattern::PF => (block.t_short, Censoring::None),
    };
    DiscountRateEstimate {
        block_id: block.block_id,
        m: block.m,
        p: block.p,
        t_weeks,
        d: weekly_factor(ratio, t_weeks),
        censoring,
        pattern,
    }
}

fn weekly_factor(ratio: f64, t_weeks: u32) -> f64 {
    if t_weeks == 1 {
        ratio
    } else {
        ratio.powf(1.0 / t_weeks as f64)
    }
}

pub fn mean_discount_rate(estimates: &[DiscountRateEstimate]) -> Result<f64, EstimationError> {
    if estimates.len() != BLOCKS_PER_SUBJECT {
        return Err(EstimationError::WrongEstimateCount { expected: BLOCKS_PER_SUBJECT, got: estimates.len() });
    }
    Ok(estimates.iter().map(|e| e.d).sum::<f64>() / BLOCKS_PER_SUBJECT as f64)
}

/// One certainty observation per horizon block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertaintyScore {
    pub horizon_years: u32,
    pub certainty: f64,
}

pub fn certainty_scores(blocks: &[CertaintyItem]) -> Result<Vec<CertaintyScore>, EstimationError> {
    if blocks.len() != CERTAINTY_BLOCKS {
        return Err(EstimationError::WrongCertaintyCount { expected: CERTAINTY_BLOCKS, got: blocks.len() });
    }
    blocks
        .iter()
        .map(|b| {
            if !(CERTAINTY_SLIDER.0..=CERTAINTY_SLIDER.1).contains(&b.certainty) {
                return Err(EstimationError::CertaintyOutOfRange(b.certainty));
            }
            Ok(CertaintyScore { horizon_years: b.horizon_years, certainty: b.certainty as f64 })
        })
        .collect()
}

/// All six block estimates for one subject.
pub fn discount_estimates(items: &[TimePrefItem]) -> Result<Vec<DiscountRateEstimate>, EstimationError> {
    Ok(blocks_from_responses(items)?.iter().map(block_discount_rate).collect())
}
