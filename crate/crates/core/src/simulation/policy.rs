use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Dollars;
use crate::questionnaire::{
    AgeGroup, CertaintyAnswer, Choice, Demographics, Education, Ethnicity, Gender, Major, Religion, TimePrefCell,
    AGREEMENT_SLIDER, CERTAINTY_SLIDER, TRUST_SLIDER,
};

#[derive(Debug, Error)]
pub enum EffectsError {
    #[error("cannot read effects file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed effects file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid population: {0}")]
    Invalid(String),
}

/// Shifts applied to High Trust subjects.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Effects {
    /// Added to every coded trust score.
    pub trust: f64,
    /// Added to the latent weekly discount factor.
    pub discount: f64,
    /// Added to the certainty slider mean.
    pub certainty: f64,
}

/// Normal draw, clamped into `[lo, hi]` by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spread {
    pub mean: f64,
    pub sd: f64,
}

impl Spread {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Spread { mean, sd }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return self.mean;
        }
        Normal::new(self.mean, self.sd).expect("validated sd").sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Population {
    /// Trust propensity; sends are `round(theta * 10)`.
    pub theta: Spread,
    /// Reciprocity; returns are `round(rho * 3x)`.
    pub rho: Spread,
    /// Latent weekly discount factor.
    pub discount: Spread,
    /// Mean coded score for questions 1..=5.
    pub trust_means: [f64; 5],
    pub trust_subject_sd: f64,
    pub trust_item_sd: f64,
    pub agreement: Spread,
    pub certainty: Spread,
    /// Logistic noise on the present/future choice; 0 is the exact threshold rule.
    pub choice_temperature: f64,
    /// Probability that a subject reports suspecting a computer counterpart.
    pub suspect_rate: f64,
}

impl Default for Population {
    fn default() -> Self {
        Population {
            theta: Spread::new(0.5, 0.25),
            rho: Spread::new(0.35, 0.15),
            discount: Spread::new(0.9, 0.06),
            trust_means: [15.8, 20.2, -15.7, 5.0, 7.3],
            trust_subject_sd: 3.0,
            trust_item_sd: 5.0,
            agreement: Spread::new(0.0, 20.0),
            certainty: Spread::new(55.0, 20.0),
            choice_temperature: 0.0,
            suspect_rate: 0.04,
        }
    }
}

impl Population {
    pub fn validate(&self) -> Result<(), EffectsError> {
        let spreads = [
            ("theta", self.theta),
            ("rho", self.rho),
            ("discount", self.discount),
            ("agreement", self.agreement),
            ("certainty", self.certainty),
        ];
        for (name, s) in spreads {
            if !s.mean.is_finite() || !s.sd.is_finite() || s.sd < 0.0 {
                return Err(EffectsError::Invalid(format!("{name}: need a finite mean and sd >= 0")));
            }
        }
        if self.trust_subject_sd < 0.0 || self.trust_item_sd < 0.0 || self.choice_temperature < 0.0 {
            return Err(EffectsError::Invalid("standard deviations and temperature must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.suspect_rate) {
            return Err(EffectsError::Invalid("suspect_rate must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Contents of an effects file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectsFile {
    pub effects: Effects,
    pub population: Population,
}

impl EffectsFile {
    pub fn from_toml_str(text: &str) -> Result<Self, EffectsError> {
        let file: EffectsFile = toml::from_str(text)?;
        file.population.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, EffectsError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("effects serialize")
    }
}

/// One synthetic subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectPolicy {
    pub theta: f64,
    pub rho: f64,
    pub discount: f64,
    pub trust_means: [f64; 5],
    /// Subject-level shift common to all five trust items.
    pub trust_offset: f64,
    pub trust_item_sd: f64,
    pub agreement: Spread,
    pub certainty: Spread,
    pub effects: Effects,
    pub choice_temperature: f64,
    pub suspects_bot: bool,
    pub demographics: Demographics,
}

fn pick<T: Copy, R: Rng + ?Sized>(all: &[T], rng: &mut R) -> T {
    all[rng.random_range(0..all.len())]
}

fn slider(value: f64, (lo, hi): (i32, i32)) -> i32 {
    (value.round() as i32).clamp(lo, hi)
}

impl SubjectPolicy {
    pub fn draw<R: Rng + ?Sized>(pop: &Population, effects: Effects, rng: &mut R) -> SubjectPolicy {
        SubjectPolicy {
            theta: pop.theta.sample(rng).clamp(0.0, 1.0),
            rho: pop.rho.sample(rng).clamp(0.0, 1.0),
            discount: pop.discount.sample(rng).clamp(0.01, 1.0),
            trust_means: pop.trust_means,
            trust_offset: Spread::new(0.0, pop.trust_subject_sd).sample(rng),
            trust_item_sd: pop.trust_item_sd,
            agreement: pop.agreement,
            certainty: pop.certainty,
            effects,
            choice_temperature: pop.choice_temperature,
            suspects_bot: rng.random_bool(pop.suspect_rate),
            demographics: Demographics {
                gender: pick(Gender::ALL, rng),
                age: pick(AgeGroup::ALL, rng),
                ethnicity: pick(Ethnicity::ALL, rng),
                education: pick(Education::ALL, rng),
                major: pick(Major::ALL, rng),
                religion: pick(Religion::ALL, rng),
            },
        }
    }

    /// Send as Participant A, out of `endowment`.
    pub fn send(&self, endowment: Dollars) -> f64 {
        (self.theta * endowment.0 as f64).round().clamp(0.0, endowment.0 as f64)
    }

    /// Return as Participant B, out of the tripled amount `available`.
    pub fn give_back(&self, available: Dollars) -> f64 {
        (self.rho * available.0 as f64).round().clamp(0.0, available.0 as f64)
    }

    /// Weekly discount factor in effect for the given arm.
    pub fn effective_discount(&self, high_trust: bool) -> f64 {
        let shift = if high_trust { self.effects.discount } else { 0.0 };
        (self.discount + shift).clamp(0.01, 1.0)
    }

    /// Future iff `D^t * m >= p`, optionally blurred by logistic noise.
    pub fn choose<R: Rng + ?Sized>(&self, cell: TimePrefCell, high_trust: bool, rng: &mut R) -> Choice {
        let d = self.effective_discount(high_trust);
        let gap = d.powi(cell.t_weeks as i32) * cell.m.0 as f64 - cell.p.0 as f64;
        let future = if self.choice_temperature > 0.0 {
            let prob = 1.0 / (1.0 + (-gap / self.choice_temperature).exp());
            rng.random_bool(prob)
        } else {
            gap >= 0.0
        };
        if future {
            Choice::Future
        } else {
            Choice::Present
        }
    }

    /// Raw slider answer for trust question `id`; the coded score is drawn and
    /// then flipped back for reverse-coded items.
    pub fn trust_answer<R: Rng + ?Sized>(&self, id: u8, reverse_coded: bool, high_trust: bool, rng: &mut R) -> i32 {
        let shift = if high_trust { self.effects.trust } else { 0.0 };
        let mean = self.trust_means[(id as usize).clamp(1, 5) - 1] + self.trust_offset + shift;
        let coded = slider(Spread::new(mean, self.trust_item_sd).sample(rng), TRUST_SLIDER);
        if reverse_coded {
            -coded
        } else {
            coded
        }
    }

    pub fn certainty_answer<R: Rng + ?Sized>(&self, high_trust: bool, rng: &mut R) -> CertaintyAnswer {
        let shift = if high_trust { self.effects.certainty } else { 0.0 };
        let agreement = slider(self.agreement.sample(rng), AGREEMENT_SLIDER);
        let certainty = slider(Spread::new(self.certainty.mean + shift, self.certainty.sd).sample(rng), CERTAINTY_SLIDER);
        CertaintyAnswer::new(agreement, certainty)
    }
}
