//! Treatment effect with question fixed effects and robust standard errors,
//! rendered as a small regression table.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use trustlab::econometrics::{build_design, ols_fit, regression_table, Dataset, FitOptions, ModelSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 8.0)?;
    let question_means = [15.8, 20.2, -15.7, 5.0, 7.3];

    let (mut h, mut q, mut score) = (Vec::new(), Vec::new(), Vec::new());
    for subject in 0..300 {
        let treated = subject % 2;
        for (i, mean) in question_means.iter().enumerate() {
            h.push(treated as f64);
            q.push(i + 1);
            score.push(mean + 4.5 * treated as f64 + noise.sample(&mut rng));
        }
    }
    let mut ds = Dataset::new();
    ds.push_numeric("high_trust", &h);
    ds.push_text("question", &q);
    ds.push_numeric("score", &score);

    let plain = ModelSpec::new("score").treatment("high_trust");
    let fe = plain.clone().fixed_effect("question");
    let a = ols_fit(&build_design(&ds, &plain)?, FitOptions::default())?;
    let b = ols_fit(&build_design(&ds, &fe)?, FitOptions::default())?;

    let table = regression_table("Trust score, planted effect 4.5", &[("no FE".into(), &a), ("question FE".into(), &b)]);
    print!("{}", table.render_text());
    Ok(())
}
