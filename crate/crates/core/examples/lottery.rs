//! Payoff-weighted lottery among finished subjects.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trustlab::game::Dollars;
use trustlab::session::{draw_lottery, LotteryEntry};

fn main() {
    let entries: Vec<LotteryEntry> = [("S0001", 60), ("S0002", 40), ("S0003", 0)]
        .into_iter()
        .map(|(id, p)| LotteryEntry { subject_id: id.into(), payoff: Dollars(p) })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let draw = draw_lottery(entries.clone(), &mut rng).unwrap();
    println!("winner {} (payoff {}), reward {}", draw.winner, draw.winner_payoff, draw.reward);

    let mut wins = std::collections::BTreeMap::new();
    for _ in 0..10_000 {
        *wins.entry(draw_lottery(entries.clone(), &mut rng).unwrap().winner).or_insert(0) += 1;
    }
    println!("10000 draws: {wins:?}");
}
