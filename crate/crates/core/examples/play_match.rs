//! One match against the counterpart, played from the game and bot modules
//! directly (no service, no event log).
//!
//!     cargo run --example play_match -- high_trust 7

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trustlab::bot::{StrategyConfig, Treatment};
use trustlab::game::{Dollars, GameConfig, MatchState, Role};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let treatment = match args.next().as_deref() {
        Some("low_trust") => Treatment::LowTrust,
        _ => Treatment::HighTrust,
    };
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let strategy = StrategyConfig::shipped();
    let bot = strategy.table(treatment);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut game = MatchState::new(treatment, GameConfig::default(), seed)?;

    // the subject sends half the endowment and returns a third of what arrives
    while let Some(p) = game.pending() {
        match p.role {
            Role::A => {
                let x = Dollars(5);
                game.apply_send(x)?;
                game.apply_return(bot.bot_return(x, &mut rng)?)?;
            }
            Role::B => {
                let x = bot.bot_send(p.round_index, &mut rng)?;
                game.apply_send(x)?;
                game.apply_return(x)?;
            }
        }
    }

    println!("{treatment}, tables {}", strategy.version());
    println!("round  role  sent  tripled  returned  payoff");
    for r in &game.rounds {
        let tag = if r.is_practice { " (practice)" } else { "" };
        println!(
            "{:>5}  {:>4}  {:>4}  {:>7}  {:>8}  {:>6}{tag}",
            r.round_index, format!("{:?}", r.role), r.sent, r.tripled, r.returned, r.subject_payoff
        );
    }
    println!("cumulative payoff (scored rounds): {}", game.cumulative_payoff);
    Ok(())
}
