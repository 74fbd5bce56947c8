//! Question banks, per-subject randomized presentation, and response checking.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Dollars;

pub const TRUST_SLIDER: (i32, i32) = (-50, 50);
pub const AGREEMENT_SLIDER: (i32, i32) = (-50, 50);
pub const CERTAINTY_SLIDER: (i32, i32) = (0, 100);

pub const SHIPPED_QUESTIONS_TOML: &str = include_str!("../config/questions.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    Present,
    Future,
}

impl FromStr for Choice {
    type Err = ResponseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "present" => Ok(Choice::Present),
            "future" => Ok(Choice::Future),
            _ => Err(ResponseError::WrongType { expected: "Present or Future", got: s.to_string() }),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResponseError {
    #[error("answer is missing")]
    Missing,
    #[error("expected {expected}, got {got}")]
    WrongType { expected: &'static str, got: String },
    #[error("{value} is outside {min}..={max}")]
    OutOfRange { value: f64, min: i32, max: i32 },
    #[error("expected {expected} answers, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("unknown {field} category {value:?}")]
    UnknownCategory { field: &'static str, value: String },
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("cannot read question bank: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed question bank: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid question bank: {0}")]
    Invalid(String),
}

/// How an item is answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemSchema {
    Binary,
    Slider { min: i32, max: i32 },
}

/// An answer as it arrives from a form: a number or a string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawAnswer {
    Number(f64),
    Text(String),
}

impl From<i32> for RawAnswer {
    fn from(v: i32) -> Self {
        RawAnswer::Number(v as f64)
    }
}

impl From<Choice> for RawAnswer {
    fn from(c: Choice) -> Self {
        RawAnswer::Text(format!("{c:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Choice(Choice),
    Slider(i32),
}

/// Sliders reject out-of-range values; nothing is clamped.
pub fn validate_response(schema: ItemSchema, answer: Option<&RawAnswer>) -> Result<Answer, ResponseError> {
    let answer = answer.ok_or(ResponseError::Missing)?;
    match (schema, answer) {
        (ItemSchema::Binary, RawAnswer::Text(s)) => s.parse().map(Answer::Choice),
        (ItemSchema::Binary, RawAnswer::Number(v)) => {
            Err(ResponseError::WrongType { expected: "Present or Future", got: v.to_string() })
        }
        (ItemSchema::Slider { .. }, RawAnswer::Text(s)) => {
            Err(ResponseError::WrongType { expected: "a whole number", got: s.clone() })
        }
        (ItemSchema::Slider { min, max }, RawAnswer::Number(v)) => {
            if !v.is_finite() || v.fract() != 0.0 {
                return Err(ResponseError::WrongType { expected: "a whole number", got: v.to_string() });
            }
            if *v < min as f64 || *v > max as f64 {
                return Err(ResponseError::OutOfRange { value: *v, min, max });
            }
            Ok(Answer::Slider(*v as i32))
        }
    }
}

fn expect_slider(schema: ItemSchema, answer: Option<&RawAnswer>) -> Result<i32, ResponseError> {
    match validate_response(schema, answer)? {
        Answer::Slider(v) => Ok(v),
        Answer::Choice(_) => unreachable!("slider schema yields slider answers"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliderLabel {
    pub value: i32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimePrefBank {
    pub prompt: String,
    pub payment_note: String,
    pub future_values: Vec<u32>,
    pub delays_weeks: Vec<u32>,
    pub present_values: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustQuestion {
    pub id: u8,
    pub text: String,
    pub reverse_coded: bool,
    pub labels: Vec<SliderLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertaintyBank {
    pub horizons_years: Vec<u32>,
    pub agreement_text: String,
    pub certainty_text: String,
    pub agreement_labels: Vec<SliderLabel>,
    pub certainty_labels: Vec<SliderLabel>,
}

impl CertaintyBank {
    pub fn agreement_prompt(&self, years: u32) -> String {
        self.agreement_text.replace("{t}", &years.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionBank {
    pub time_preference: TimePrefBank,
    pub trust: Vec<TrustQuestion>,
    pub certainty: CertaintyBank,
}

/// One cell of the present-versus-future grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimePrefCell {
    pub m: Dollars,
    pub t_weeks: u32,
    pub p: Dollars,
}

impl QuestionBank {
    pub fn shipped() -> QuestionBank {
        QuestionBank::from_toml_str(SHIPPED_QUESTIONS_TOML).expect("shipped question bank is valid")
    }

    pub fn load(path: &Path) -> Result<QuestionBank, BankError> {
        QuestionBank::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(text: &str) -> Result<QuestionBank, BankError> {
        let bank: QuestionBank = toml::from_str(text)?;
        bank.validate()?;
        Ok(bank)
    }

    fn validate(&self) -> Result<(), BankError> {
        let tp = &self.time_preference;
        if tp.present_values.len() != tp.future_values.len() {
            return Err(BankError::Invalid("one row of present values per future value".into()));
        }
        if !tp.delays_weeks.len().is_multiple_of(2) || tp.delays_weeks.is_empty() {
            return Err(BankError::Invalid("delays must come in (short, long) pairs".into()));
        }
        if tp.delays_weeks.chunks(2).any(|pair| pair[0] >= pair[1]) {
            return Err(BankError::Invalid("each delay pair must be increasing".into()));
        }
        for (m, row) in tp.future_values.iter().zip(&tp.present_values) {
            if row.len() != tp.delays_weeks.len() {
                return Err(BankError::Invalid(format!("row for m = {m} has the wrong length")));
            }
            if row.chunks(2).any(|pair| pair[0] != pair[1]) {
                return Err(BankError::Invalid(format!("m = {m}: present value must be shared within a delay pair")));
            }
            if row.iter().any(|p| *p == 0 || p > m) {
                return Err(BankError::Invalid(format!("m = {m}: present values must lie in 1..=m")));
            }
        }
        let mut ids: Vec<u8> = self.trust.iter().map(|q| q.id).collect();
        ids.sort_unstable();
        if ids != [1, 2, 3, 4, 5] {
            return Err(BankError::Invalid(format!("trust question ids must be 1..=5, got {ids:?}")));
        }
        if self.certainty.horizons_years.len() != 2 {
            return Err(BankError::Invalid("exactly two certainty horizons are required".into()));
        }
        Ok(())
    }

    /// All grid cells in row-major order (by `m`, then by delay).
    pub fn time_pref_grid(&self) -> Vec<TimePrefCell> {
        let tp = &self.time_preference;
        tp.future_values
            .iter()
            .zip(&tp.present_values)
            .flat_map(|(m, row)| {
                tp.delays_weeks.iter().zip(row).map(move |(t, p)| TimePrefCell {
                    m: Dollars(*m),
                    t_weeks: *t,
                    p: Dollars(*p),
                })
            })
            .collect()
    }

    pub fn present_value(&self, m: Dollars, t_weeks: u32) -> Option<Dollars> {
        self.time_pref_grid().into_iter().find(|c| c.m == m && c.t_weeks == t_weeks).map(|c| c.p)
    }

    pub fn trust_question(&self, id: u8) -> Option<&TrustQuestion> {
        self.trust.iter().find(|q| q.id == id)
    }

    pub fn is_reverse_coded(&self, id: u8) -> bool {
        self.trust_question(id).is_some_and(|q| q.reverse_coded)
    }

    /// Randomized time-preference presentation for one subject.
    pub fn build_time_pref_sequence(&self, seed: u64) -> Vec<PresentedTimePref> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cells = self.time_pref_grid();
        cells.shuffle(&mut rng);
        cells
            .into_iter()
            .map(|cell| PresentedTimePref { cell, present_first: rng.random_bool(0.5) })
            .collect()
    }

    /// Randomized order of the trust question ids for one subject.
    pub fn build_trust_sequence(&self, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids: Vec<u8> = self.trust.iter().map(|q| q.id).collect();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        ids
    }

    /// Checks a full set of time-preference answers given in presentation order.
    pub fn record_time_pref(
        &self,
        presented: &[PresentedTimePref],
        answers: &[RawAnswer],
    ) -> Result<Vec<TimePrefItem>, ResponseError> {
        if answers.len() != presented.len() {
            return Err(ResponseError::WrongCount { expected: presented.len(), got: answers.len() });
        }
        presented
            .iter()
            .zip(answers)
            .map(|(item, raw)| match validate_response(ItemSchema::Binary, Some(raw))? {
                Answer::Choice(choice) => Ok(TimePrefItem { cell: item.cell, choice }),
                Answer::Slider(_) => unreachable!("binary schema yields choices"),
            })
            .collect()
    }

    /// Checks the five trust answers given in presentation order.
    pub fn record_trust(&self, order: &[u8], answers: &[RawAnswer]) -> Result<Vec<TrustItem>, ResponseError> {
        if answers.len() != order.len() {
            return Err(ResponseError::WrongCount { expected: order.len(), got: answers.len() });
        }
        let schema = ItemSchema::Slider { min: TRUST_SLIDER.0, max: TRUST_SLIDER.1 };
        let mut items = order
            .iter()
            .zip(answers)
            .map(|(id, raw)| {
                let raw = expect_slider(schema, Some(raw))?;
                Ok(TrustItem::new(*id, raw, self.is_reverse_coded(*id)))
            })
            .collect::<Result<Vec<_>, ResponseError>>()?;
        items.sort_by_key(|i| i.question_id);
        Ok(items)
    }

    /// Checks the two certainty blocks, one per configured horizon.
    pub fn record_certainty(&self, answers: &[CertaintyAnswer]) -> Result<Vec<CertaintyItem>, ResponseError> {
        let horizons = &self.certainty.horizons_years;
        if answers.len() != horizons.len() {
            return Err(ResponseError::WrongCount { expected: horizons.len(), got: answers.len() });
        }
        let agreement = ItemSchema::Slider { min: AGREEMENT_SLIDER.0, max: AGREEMENT_SLIDER.1 };
        let certainty = ItemSchema::Slider { min: CERTAINTY_SLIDER.0, max: CERTAINTY_SLIDER.1 };
        horizons
            .iter()
            .zip(answers)
            .map(|(years, a)| {
                Ok(CertaintyItem {
                    horizon_years: *years,
                    agreement: expect_slider(agreement, a.agreement.as_ref())?,
                    certainty: expect_slider(certainty, a.certainty.as_ref())?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedTimePref {
    #[serde(flatten)]
    pub cell: TimePrefCell,
    /// Whether "paid today" is listed above "paid later".
    pub present_first: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimePrefItem {
    #[serde(flatten)]
    pub cell: TimePrefCell,
    pub choice: Choice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustItem {
    pub question_id: u8,
    pub raw: i32,
    pub coded: i32,
}

impl TrustItem {
    pub fn new(question_id: u8, raw: i32, reverse_coded: bool) -> TrustItem {
        let coded = if reverse_coded { -raw } else { raw };
        TrustItem { question_id, raw, coded }
    }
}

/// Applies the shipped reverse coding to raw answers indexed by question id
/// (`raw[0]` is question 1). Questions 2 and 3 are negated.
pub fn code_trust(raw: [i32; 5]) -> Result<[i32; 5], ResponseError> {
    let mut coded = [0; 5];
    for (i, value) in raw.iter().enumerate() {
        if !(TRUST_SLIDER.0..=TRUST_SLIDER.1).contains(value) {
            return Err(ResponseError::OutOfRange { value: *value as f64, min: TRUST_SLIDER.0, max: TRUST_SLIDER.1 });
        }
        coded[i] = if i == 1 || i == 2 { -value } else { *value };
    }
    Ok(coded)
}

/// One certainty block as submitted: agreement slider then certainty slider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertaintyAnswer {
    pub agreement: Option<RawAnswer>,
    pub certainty: Option<RawAnswer>,
}

impl CertaintyAnswer {
    pub fn new(agreement: i32, certainty: i32) -> Self {
        CertaintyAnswer { agreement: Some(agreement.into()), certainty: Some(certainty.into()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertaintyItem {
    pub horizon_years: u32,
    pub agreement: i32,
    pub certainty: i32,
}

macro_rules! categorical {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $code:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $code)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }
        }

        impl FromStr for $name {
            type Err = ResponseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($code => Ok($name::$variant),)+
                    _ => Err(ResponseError::UnknownCategory { field: $field, value: s.to_string() }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }
    };
}

categorical!(Gender, "gender" {
    Female => "female",
    Male => "male",
    Other => "other",
});

categorical!(AgeGroup, "age" {
    From18To21 => "18-21",
    From22To25 => "22-25",
    From26To30 => "26-30",
    Over30 => "31+",
});

categorical!(Ethnicity, "ethnicity" {
    White => "white",
    Asian => "asian",
    Hispanic => "hispanic",
    Black => "black",
    Other => "other",
});

categorical!(Education, "education" {
    HighSchool => "high_school",
    SomeCollege => "some_college",
    Bachelor => "bachelor",
    Graduate => "graduate",
});

categorical!(
    /// College major, pursued or completed.
    Major, "major" {
    Economics => "economics",
    Psychology => "psychology",
    OtherSocialScience => "other_social_science",
    Stem => "stem",
    Humanities => "humanities",
    Other => "other",
    NoMajor => "none",
});

categorical!(Religion, "religion" {
    NoPractice => "none",
    Occasional => "occasional",
    Regular => "regular",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: Gender,
    pub age: AgeGroup,
    pub ethnicity: Ethnicity,
    pub education: Education,
    pub major: Major,
    pub religion: Religion,
}

impl Demographics {
    /// Column names used in exported datasets, in export order.
    pub const COLUMNS: [&'static str; 6] = ["gender", "age", "ethnicity", "education", "major", "religion"];

    pub fn codes(&self) -> [&'static str; 6] {
        [
            self.gender.code(),
            self.age.code(),
            self.ethnicity.code(),
            self.education.code(),
            self.major.code(),
            self.religion.code(),
        ]
    }
}

/// Everything one subject answered, plus what they were shown.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResponseSet {
    pub time_pref_presented: Vec<PresentedTimePref>,
    pub time_pref: Vec<TimePrefItem>,
    pub trust_order: Vec<u8>,
    pub trust: Vec<TrustItem>,
    pub certainty: Vec<CertaintyItem>,
    pub demographics: Option<Demographics>,
}

impl ResponseSet {
    pub fn is_complete(&self) -> bool {
        self.time_pref.len() == 12 && self.trust.len() == 5 && self.certainty.len() == 2 && self.demographics.is_some()
    }
}
