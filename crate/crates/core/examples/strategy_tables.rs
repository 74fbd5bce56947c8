//! Inspect the shipped counterpart tables and see what the validator says
//! about a pair that breaks the rules.

use trustlab::bot::{validate_strategy_table, StrategyConfig, StrategyTable, Treatment};
use trustlab::game::Dollars;

fn main() {
    let shipped = StrategyConfig::shipped();
    let (high, low) = (shipped.table(Treatment::HighTrust), shipped.table(Treatment::LowTrust));

    println!("x   high returns     mean    low returns      mean");
    for x in 0..=10u32 {
        let (h, l) = (&high.returns[x as usize], &low.returns[x as usize]);
        println!(
            "{x:>2}  {:<15}  {:>5}   {:<15}  {:>5}",
            format!("{:?}", h.map(|d| d.0)),
            high.expected_return(Dollars(x)).unwrap().to_string(),
            format!("{:?}", l.map(|d| d.0)),
            low.expected_return(Dollars(x)).unwrap().to_string(),
        );
    }
    let values = |t: &StrategyTable| t.send.support.iter().map(|d| d.0).collect::<Vec<_>>();
    println!("high sends {:?}, low sends {:?}", values(high), values(low));

    // Give the Low Trust bot generous returns at x = 4 and a send of 9.
    let mut bad_low: StrategyTable = low.clone();
    bad_low.returns[4] = [Dollars(12), Dollars(12), Dollars(12)];
    bad_low.send.support[3] = Dollars(9);
    let report = validate_strategy_table(high, &bad_low);
    println!("\nedited pair: {} problem(s)", report.violations.len());
    for v in &report.violations {
        println!("  - {v}");
    }
}
