//! Weekly discount factors from a subject's twelve present-vs-future choices.

use trustlab::estimation::{discount_estimates, mean_discount_rate};
use trustlab::questionnaire::{Choice, QuestionBank, TimePrefItem};

fn main() {
    let bank = QuestionBank::shipped();
    // Someone with weekly factor 0.93 who waits whenever 0.93^t * m >= p.
    let d: f64 = 0.93;
    let items: Vec<TimePrefItem> = bank
        .time_pref_grid()
        .into_iter()
        .map(|cell| {
            let wait = d.powi(cell.t_weeks as i32) * cell.m.0 as f64 >= cell.p.0 as f64;
            TimePrefItem { cell, choice: if wait { Choice::Future } else { Choice::Present } }
        })
        .collect();

    let estimates = discount_estimates(&items).expect("complete grid");
    println!("block   m   p  weeks  pattern  censoring      D");
    for e in &estimates {
        println!(
            "{:>5}  {:>2}  {:>2}  {:>5}  {:>7}  {:>9}  {:.4}",
            e.block_id,
            e.m,
            e.p,
            e.t_weeks,
            e.pattern.to_string(),
            e.censoring.code(),
            e.d
        );
    }
    println!("subject mean D = {:.4}", mean_discount_rate(&estimates).unwrap());
}
