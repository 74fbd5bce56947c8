//! Per-subject presentation order for the time-preference grid and the trust
//! questions, plus reverse coding of trust answers.

use trustlab::questionnaire::{code_trust, QuestionBank};

fn main() {
    let bank = QuestionBank::shipped();
    for seed in [1u64, 2] {
        println!("subject seed {seed}");
        for (i, item) in bank.build_time_pref_sequence(seed).iter().enumerate() {
            let c = item.cell;
            let (first, second) = if item.present_first {
                (format!("{} today", c.p), format!("{} in {} weeks", c.m, c.t_weeks))
            } else {
                (format!("{} in {} weeks", c.m, c.t_weeks), format!("{} today", c.p))
            };
            println!("  {:>2}. {first:<18} or  {second}", i + 1);
        }
        println!("  trust order: {:?}", bank.build_trust_sequence(seed));
    }

    let raw = [20, 30, 40, -10, 0];
    println!("\nraw trust answers {raw:?} -> coded {:?}", code_trust(raw).unwrap());
}
