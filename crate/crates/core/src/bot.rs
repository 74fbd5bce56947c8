//! The algorithmic counterpart.
//!
//! As Participant A the bot draws a send from a treatment-specific frequency
//! table; as Participant B it returns one of three treatment-specific amounts
//! with equal probability. The pair of tables is only usable once it passes
//! [`validate_strategy_table`]: High Trust sends live in `{7, 8, 9, 10}`, Low
//! Trust sends in `{0, 1, 2, 3}`, and for every transfer the High Trust mean
//! return is at least the Low Trust one.

use std::fmt;
use std::path::Path;

use num_rational::Ratio;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Dollars;

/// Experimental arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    HighTrust,
    LowTrust,
}

impl Treatment {
    pub const ALL: [Treatment; 2] = [Treatment::HighTrust, Treatment::LowTrust];

    /// Value of the High Trust dummy `H`.
    pub fn dummy(self) -> u8 {
        match self {
            Treatment::HighTrust => 1,
            Treatment::LowTrust => 0,
        }
    }

    /// Sends the bot may make as Participant A in scored rounds.
    pub fn allowed_sends(self) -> [u32; 4] {
        match self {
            Treatment::HighTrust => [7, 8, 9, 10],
            Treatment::LowTrust => [0, 1, 2, 3],
        }
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Treatment::HighTrust => "high_trust",
            Treatment::LowTrust => "low_trust",
        })
    }
}

/// Largest transfer the tables must cover.
pub const TABLE_MAX_SEND: u32 = 10;

/// Practice-round send, identical in both arms.
pub const DEFAULT_PRACTICE_SEND: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SendDistribution {
    pub support: Vec<Dollars>,
    /// Relative frequencies, one per support value. Need not sum to 1.
    pub weights: Vec<f64>,
}

impl SendDistribution {
    pub fn uniform(support: impl IntoIterator<Item = u32>) -> Self {
        let support: Vec<Dollars> = support.into_iter().map(Dollars).collect();
        let weights = vec![1.0; support.len()];
        SendDistribution { support, weights }
    }

    /// Weights scaled to sum to one.
    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTable {
    pub treatment: Treatment,
    pub send: SendDistribution,
    /// `returns[x]` holds the three equally likely returns for a transfer of `x`.
    pub returns: Vec<[Dollars; 3]>,
    pub practice_send: Dollars,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BotError {
    #[error("the bot plays B in round {0} and does not send")]
    BotIsReceiver(u32),
    #[error("transfer {x} is outside the table range 0..={max}")]
    TransferOutOfRange { x: Dollars, max: u32 },
    #[error("send distribution is unusable: {0}")]
    BadDistribution(String),
}

impl StrategyTable {
    /// Default table: uniform send weights over the arm's support, and return
    /// triples obtained by scaling the `x = 5` triple proportionally to `x`.
    /// High Trust rounds up, Low Trust rounds down, both clamped to `[0, 3x]`.
    pub fn default_for(treatment: Treatment) -> StrategyTable {
        let (base, round_up): ([u32; 3], bool) = match treatment {
            Treatment::HighTrust => ([7, 8, 10], true),
            Treatment::LowTrust => ([2, 1, 0], false),
        };
        let returns = (0..=TABLE_MAX_SEND)
            .map(|x| {
                base.map(|b| {
                    let scaled = if round_up { (b * x).div_ceil(5) } else { b * x / 5 };
                    Dollars(scaled.min(3 * x))
                })
            })
            .collect();
        StrategyTable {
            treatment,
            send: SendDistribution::uniform(treatment.allowed_sends()),
            returns,
            practice_send: Dollars(DEFAULT_PRACTICE_SEND),
        }
    }

    /// Bot's send as Participant A. Round 0 is the practice round.
    pub fn bot_send<R: Rng + ?Sized>(&self, round_index: u32, rng: &mut R) -> Result<Dollars, BotError> {
        if round_index == 0 {
            return Ok(self.practice_send);
        }
        if round_index % 2 == 1 {
            return Err(BotError::BotIsReceiver(round_index));
        }
        let dist = WeightedIndex::new(&self.send.weights).map_err(|e| BotError::BadDistribution(e.to_string()))?;
        Ok(self.send.support[dist.sample(rng)])
    }

    /// Bot's return as Participant B: one of the three entries for `x`, uniformly.
    pub fn bot_return<R: Rng + ?Sized>(&self, x: Dollars, rng: &mut R) -> Result<Dollars, BotError> {
        let triple = self.triple(x)?;
        Ok(triple[rng.random_range(0..3)])
    }

    /// Exact mean of the return triple for `x`.
    pub fn expected_return(&self, x: Dollars) -> Result<Ratio<u64>, BotError> {
        let triple = self.triple(x)?;
        let sum: u64 = triple.iter().map(|d| d.0 as u64).sum();
        Ok(Ratio::new(sum, 3))
    }

    fn triple(&self, x: Dollars) -> Result<&[Dollars; 3], BotError> {
        self.returns.get(x.0 as usize).ok_or(BotError::TransferOutOfRange {
            x,
            max: self.returns.len().saturating_sub(1) as u32,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    WrongTreatment { expected: Treatment, found: Treatment },
    EmptySupport { treatment: Treatment },
    WeightCountMismatch { treatment: Treatment, support: usize, weights: usize },
    SendOutsideArm { treatment: Treatment, value: Dollars },
    DuplicateSend { treatment: Treatment, value: Dollars },
    NonPositiveWeight { treatment: Treatment, value: Dollars },
    MissingReturns { treatment: Treatment, expected: usize, found: usize },
    ReturnOutOfBounds { treatment: Treatment, x: u32, value: Dollars, max: Dollars },
    Dominance { x: u32, high: Ratio<u64>, low: Ratio<u64> },
    PracticeSendMismatch { high: Dollars, low: Dollars },
    PracticeSendOutOfRange { treatment: Treatment, value: Dollars },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongTreatment { expected, found } => {
                write!(f, "table for {expected} is labelled {found}")
            }
            Violation::EmptySupport { treatment } => write!(f, "{treatment}: send support is empty"),
            Violation::WeightCountMismatch { treatment, support, weights } => {
                write!(f, "{treatment}: {support} send values but {weights} weights")
            }
            Violation::SendOutsideArm { treatment, value } => {
                write!(f, "{treatment}: send {value} is outside {:?}", treatment.allowed_sends())
            }
            Violation::DuplicateSend { treatment, value } => {
                write!(f, "{treatment}: send {value} listed twice")
            }
            Violation::NonPositiveWeight { treatment, value } => {
                write!(f, "{treatment}: send {value} has a non-positive weight")
            }
            Violation::MissingReturns { treatment, expected, found } => {
                write!(f, "{treatment}: expected return triples for {expected} transfers, found {found}")
            }
            Violation::ReturnOutOfBounds { treatment, x, value, max } => {
                write!(f, "{treatment}: return {value} for x = {x} exceeds {max}")
            }
            Violation::Dominance { x, high, low } => {
                write!(f, "x = {x}: high-trust mean return {high} is below low-trust {low}")
            }
            Violation::PracticeSendMismatch { high, low } => {
                write!(f, "practice send differs between arms ({high} vs {low})")
            }
            Violation::PracticeSendOutOfRange { treatment, value } => {
                write!(f, "{treatment}: practice send {value} exceeds the endowment")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks a High/Low table pair. Every problem is reported, not just the first.
pub fn validate_strategy_table(high: &StrategyTable, low: &StrategyTable) -> ValidationReport {
    let mut violations = Vec::new();
    for (table, expected) in [(high, Treatment::HighTrust), (low, Treatment::LowTrust)] {
        if table.treatment != expected {
            violations.push(Violation::WrongTreatment { expected, found: table.treatment });
        }
        check_single(table, expected, &mut violations);
    }

    if high.practice_send != low.practice_send {
        violations.push(Violation::PracticeSendMismatch { high: high.practice_send, low: low.practice_send });
    }

    let covered = high.returns.len().min(low.returns.len()).min(TABLE_MAX_SEND as usize + 1);
    for x in 0..covered as u32 {
        let (Ok(h), Ok(l)) = (high.expected_return(Dollars(x)), low.expected_return(Dollars(x))) else {
            continue;
        };
        if h < l {
            violations.push(Violation::Dominance { x, high: h, low: l });
        }
    }
    ValidationReport { violations }
}

fn check_single(table: &StrategyTable, arm: Treatment, out: &mut Vec<Violation>) {
    let treatment = arm;
    let send = &table.send;
    if send.support.is_empty() {
        out.push(Violation::EmptySupport { treatment });
    }
    if send.support.len() != send.weights.len() {
        out.push(Violation::WeightCountMismatch {
            treatment,
            support: send.support.len(),
            weights: send.weights.len(),
        });
    }
    let allowed = arm.allowed_sends();
    for (i, value) in send.support.iter().enumerate() {
        if !allowed.contains(&value.0) {
            out.push(Violation::SendOutsideArm { treatment, value: *value });
        }
        if send.support[..i].contains(value) {
            out.push(Violation::DuplicateSend { treatment, value: *value });
        }
        match send.weights.get(i) {
            Some(w) if w.is_finite() && *w > 0.0 => {}
            Some(_) => out.push(Violation::NonPositiveWeight { treatment, value: *value }),
            None => {}
        }
    }

    let expected = TABLE_MAX_SEND as usize + 1;
    if table.returns.len() != expected {
        out.push(Violation::MissingReturns { treatment, expected, found: table.returns.len() });
    }
    for (x, triple) in table.returns.iter().enumerate() {
        let max = Dollars(3 * x as u32);
        for value in triple {
            if *value > max {
                out.push(Violation::ReturnOutOfBounds { treatment, x: x as u32, value: *value, max });
            }
        }
    }

    if table.practice_send.0 > TABLE_MAX_SEND {
        out.push(Violation::PracticeSendOutOfRange { treatment, value: table.practice_send });
    }
}

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("cannot read strategy file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed strategy file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("strategy tables rejected: {0}")]
    Invalid(ValidationReport),
}

/// A validated High/Low pair with a version tag recorded on every bot draw.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    version: String,
    high: StrategyTable,
    low: StrategyTable,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyFile {
    version: String,
    high_trust: TableSection,
    low_trust: TableSection,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableSection {
    practice_send: Dollars,
    send_support: Vec<Dollars>,
    send_weights: Vec<f64>,
    returns: Vec<[Dollars; 3]>,
}

impl TableSection {
    fn into_table(self, treatment: Treatment) -> StrategyTable {
        StrategyTable {
            treatment,
            send: SendDistribution { support: self.send_support, weights: self.send_weights },
            returns: self.returns,
            practice_send: self.practice_send,
        }
    }

    fn from_table(t: &StrategyTable) -> Self {
        TableSection {
            practice_send: t.practice_send,
            send_support: t.send.support.clone(),
            send_weights: t.send.weights.clone(),
            returns: t.returns.clone(),
        }
    }
}

pub const DEFAULT_STRATEGY_TOML: &str = include_str!("../config/strategy_default.toml");

impl StrategyConfig {
    pub fn new(version: impl Into<String>, high: StrategyTable, low: StrategyTable) -> Result<Self, StrategyError> {
        let report = validate_strategy_table(&high, &low);
        if !report.is_valid() {
            return Err(StrategyError::Invalid(report));
        }
        Ok(StrategyConfig { version: version.into(), high, low })
    }

    /// The shipped tables.
    pub fn shipped() -> StrategyConfig {
        StrategyConfig::from_toml_str(DEFAULT_STRATEGY_TOML).expect("shipped strategy file is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, StrategyError> {
        let file: StrategyFile = toml::from_str(text)?;
        StrategyConfig::new(
            file.version,
            file.high_trust.into_table(Treatment::HighTrust),
            file.low_trust.into_table(Treatment::LowTrust),
        )
    }

    pub fn load(path: &Path) -> Result<Self, StrategyError> {
        StrategyConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let file = StrategyFile {
            version: self.version.clone(),
            high_trust: TableSection::from_table(&self.high),
            low_trust: TableSection::from_table(&self.low),
        };
        toml::to_string(&file).expect("strategy tables serialize")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn table(&self, treatment: Treatment) -> &StrategyTable {
        match treatment {
            Treatment::HighTrust => &self.high,
            Treatment::LowTrust => &self.low,
        }
    }
}
