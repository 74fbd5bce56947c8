use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Dollars;

pub const REWARD_MIN: u32 = 25;
pub const REWARD_MAX: u32 = 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LotteryError {
    #[error("no subject has finished, so nobody is eligible")]
    NoEligibleSubjects,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotteryEntry {
    pub subject_id: String,
    pub payoff: Dollars,
}

impl LotteryEntry {
    /// Payoff, with zero raised to 1 so every finisher has a chance.
    pub fn weight(&self) -> u32 {
        self.payoff.0.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotteryDraw {
    pub eligible: Vec<LotteryEntry>,
    pub winner: String,
    pub winner_payoff: Dollars,
    pub reward: Dollars,
}

/// Picks a winner with probability proportional to [`LotteryEntry::weight`]
/// and a whole-dollar reward uniform on `25..=40`.
pub fn draw_lottery<R: Rng + ?Sized>(eligible: Vec<LotteryEntry>, rng: &mut R) -> Result<LotteryDraw, LotteryError> {
    if eligible.is_empty() {
        return Err(LotteryError::NoEligibleSubjects);
    }
    let dist = WeightedIndex::new(eligible.iter().map(LotteryEntry::weight)).expect("weights are positive");
    let w = &eligible[dist.sample(rng)];
    let (winner, winner_payoff) = (w.subject_id.clone(), w.payoff);
    let reward = Dollars(rng.random_range(REWARD_MIN..=REWARD_MAX));
    Ok(LotteryDraw { eligible, winner, winner_payoff, reward })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn entry(id: &str, payoff: u32) -> LotteryEntry {
        LotteryEntry { subject_id: id.into(), payoff: Dollars(payoff) }
    }

    #[test]
    fn zero_payoff_gets_floor_weight() {
        assert_eq!(entry("a", 0).weight(), 1);
        assert_eq!(entry("a", 100).weight(), 100);
    }

    #[test]
    fn single_subject_always_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let d = draw_lottery(vec![entry("only", 0)], &mut rng).unwrap();
            assert_eq!(d.winner, "only");
            assert!((REWARD_MIN..=REWARD_MAX).contains(&d.reward.0));
        }
    }

    #[test]
    fn nobody_eligible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(draw_lottery(vec![], &mut rng), Err(LotteryError::NoEligibleSubjects));
    }

    #[test]
    fn hundred_to_zero_odds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let wins = (0..n)
            .filter(|_| draw_lottery(vec![entry("a", 100), entry("b", 0)], &mut rng).unwrap().winner == "a")
            .count();
        let p = wins as f64 / n as f64;
        // 100/101 = 0.990099; binomial sd is about 0.0002
        assert!((p - 100.0 / 101.0).abs() < 0.0015, "{p}");
    }
}
