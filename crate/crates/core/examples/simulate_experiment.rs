//! Simulated experiment with a planted trust effect; prints the recovered
//! treatment coefficients next to the planted ones.
//!
//!     cargo run --release --example simulate_experiment -- 1000

use trustlab::simulation::{run_experiment, Effects, SimulationConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(400);
    let effects = Effects { trust: 4.5, discount: 0.0, certainty: 3.0 };
    let exp = run_experiment(&SimulationConfig::new(n, 2).effects(effects), None)?;

    let r = &exp.report;
    println!("n = {} ({} high trust, {} low trust)", r.n, r.high_trust_subjects, r.low_trust_subjects);
    println!("rows: trust {}, discount {}, certainty {}", r.rows[0], r.rows[1], r.rows[2]);
    for rec in &r.recoveries {
        if let (Some(est), Some(lo), Some(hi)) = (rec.estimate, rec.ci_low, rec.ci_high) {
            println!("{:<9} planted {:>6.3}  estimate {:>7.3}  95% [{lo:.3}, {hi:.3}]", rec.effect, rec.planted, est);
        }
    }
    println!();
    print!("{}", exp.analysis.trust.render_text());
    Ok(())
}
