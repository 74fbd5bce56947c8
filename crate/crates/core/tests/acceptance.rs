//! Acceptance checks. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; the process fails if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{hc1_by_definition, int, max_abs_diff, normal_equations, rat, to_f64};
use nalgebra::{DMatrix, DVector};
use trustlab::bot::{SendDistribution, StrategyConfig, StrategyTable, Treatment, TABLE_MAX_SEND};
use trustlab::econometrics::{build_design, ols_fit, Dataset, DesignMatrix, FitOptions, ModelSpec, INTERCEPT};
use trustlab::estimation::{block_discount_rate, blocks_from_responses, ChoiceBlock, Pattern};
use trustlab::game::Dollars;
use trustlab::questionnaire::{Choice, QuestionBank, TimePrefItem};
use trustlab::session::{read_log_dir, ExperimentService, JsonlSink, ServiceConfig, SubjectFlow};
use trustlab::simulation::{run_experiment, Effects, SimulationConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exact_mean(triple: &[Dollars; 3]) -> BigRational {
    triple.iter().fold(int(0), |acc, d| acc + int(d.0 as i64)) / int(3)
}

/// Dominance decided from the raw triples, independent of the library.
fn oracle_dominates(high: &StrategyTable, low: &StrategyTable) -> bool {
    (0..=TABLE_MAX_SEND as usize).all(|x| exact_mean(&high.returns[x]) >= exact_mean(&low.returns[x]))
}

fn random_triple(rng: &mut ChaCha8Rng, x: u32) -> [Dollars; 3] {
    [(); 3].map(|_| Dollars(rng.random_range(0..=3 * x)))
}

fn random_sends(rng: &mut ChaCha8Rng, arm: Treatment) -> SendDistribution {
    let mut support: Vec<Dollars> = arm.allowed_sends().into_iter().filter(|_| rng.random_bool(0.6)).map(Dollars).collect();
    if support.is_empty() {
        support.push(Dollars(arm.allowed_sends()[rng.random_range(0..4)]));
    }
    let weights = support.iter().map(|_| rng.random_range(0.05..5.0)).collect();
    SendDistribution { support, weights }
}

/// A table pair that satisfies every rule, with dominance enforced by
/// redrawing the High Trust triple.
fn random_valid_pair(rng: &mut ChaCha8Rng) -> (StrategyTable, StrategyTable) {
    let practice = Dollars(rng.random_range(0..=10));
    let mut high_returns = Vec::new();
    let mut low_returns = Vec::new();
    for x in 0..=TABLE_MAX_SEND {
        let low = random_triple(rng, x);
        let floor: u32 = low.iter().map(|d| d.0).sum();
        let high = loop {
            let t = random_triple(rng, x);
            if t.iter().map(|d| d.0).sum::<u32>() >= floor {
                break t;
            }
        };
        high_returns.push(high);
        low_returns.push(low);
    }
    let table = |treatment, send, returns| StrategyTable { treatment, send, returns, practice_send: practice };
    (
        table(Treatment::HighTrust, random_sends(rng, Treatment::HighTrust), high_returns),
        table(Treatment::LowTrust, random_sends(rng, Treatment::LowTrust), low_returns),
    )
}

fn dominance() -> Check {
    let shipped = StrategyConfig::shipped();
    let (h, l) = (shipped.table(Treatment::HighTrust), shipped.table(Treatment::LowTrust));
    ensure(oracle_dominates(h, l), || "shipped tables violate dominance".into())?;
    for x in 0..=TABLE_MAX_SEND {
        let lib = (h.expected_return(Dollars(x)).unwrap(), l.expected_return(Dollars(x)).unwrap());
        ensure(lib.0 >= lib.1, || format!("library compares x = {x} wrongly"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..1000 {
        let (high, low) = random_valid_pair(&mut rng);
        ensure(oracle_dominates(&high, &low), || format!("generator produced a dominated pair at {i}"))?;
        let config = StrategyConfig::new(format!("random-{i}"), high, low).map_err(|e| format!("config {i}: {e}"))?;
        for x in 0..=TABLE_MAX_SEND {
            let hi = config.table(Treatment::HighTrust).expected_return(Dollars(x)).unwrap();
            let lo = config.table(Treatment::LowTrust).expected_return(Dollars(x)).unwrap();
            let exact_hi = exact_mean(&config.table(Treatment::HighTrust).returns[x as usize]);
            ensure(int(*hi.numer() as i64) / int(*hi.denom() as i64) == exact_hi, || format!("config {i}: mean at x = {x}"))?;
            ensure(hi >= lo, || format!("config {i}: x = {x} high {hi} < low {lo}"))?;
        }
    }

    // The validator must also reject exactly the pairs the oracle rejects.
    let mut rejected = 0;
    for i in 0..1000 {
        let (mut high, low) = random_valid_pair(&mut rng);
        let x = rng.random_range(0..=TABLE_MAX_SEND as usize);
        high.returns[x] = random_triple(&mut rng, x as u32);
        let accepted = StrategyConfig::new("probe", high.clone(), low.clone()).is_ok();
        ensure(accepted == oracle_dominates(&high, &low), || format!("probe {i}: validator and oracle disagree"))?;
        rejected += usize::from(!accepted);
    }
    Ok(format!("shipped + 1000 random valid configs dominate; {rejected}/1000 perturbed pairs correctly rejected"))
}

fn strategy_cells() -> Check {
    let shipped = StrategyConfig::shipped();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (arm, allowed) in [(Treatment::HighTrust, [7, 8, 10]), (Treatment::LowTrust, [2, 1, 0])] {
        let table = shipped.table(arm);
        let mut seen = [0usize; 3];
        for _ in 0..10_000 {
            let y = table.bot_return(Dollars(5), &mut rng).unwrap();
            let pos = allowed.iter().position(|a| *a == y.0).ok_or_else(|| format!("{arm}: return {y} at x = 5"))?;
            seen[pos] += 1;
        }
        ensure(seen.iter().all(|c| *c > 0), || format!("{arm}: some quoted value never drawn {seen:?}"))?;
        let practice = table.bot_send(0, &mut rng).unwrap();
        ensure(practice == Dollars(5), || format!("{arm}: practice send {practice}"))?;
    }
    Ok("10^4 draws per arm at x = 5 inside the quoted triples; practice send 5 in both arms".into())
}

fn send_support() -> Check {
    let shipped = StrategyConfig::shipped();
    let mut worst: f64 = 0.0;
    for (i, arm) in Treatment::ALL.into_iter().enumerate() {
        let table = shipped.table(arm);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        let draws = 100_000;
        for d in 0..draws {
            let x = table.bot_send(2 + 2 * (d % 5) as u32, &mut rng).unwrap();
            ensure(arm.allowed_sends().contains(&x.0), || format!("{arm}: send {x}"))?;
            *counts.entry(x.0).or_default() += 1;
        }
        let probs = table.send.probabilities();
        let tv = 0.5
            * table
                .send
                .support
                .iter()
                .zip(&probs)
                .map(|(v, p)| (*counts.get(&v.0).unwrap_or(&0) as f64 / draws as f64 - p).abs())
                .sum::<f64>();
        ensure(tv <= 0.01, || format!("{arm}: total variation {tv:.5}"))?;
        worst = worst.max(tv);
    }
    Ok(format!("10^5 draws per arm inside the arm's support; max TV {worst:.5}"))
}

fn discount_oracle() -> Check {
    let bank = QuestionBank::shipped();
    let patterns = [
        (Choice::Future, Choice::Future),
        (Choice::Future, Choice::Present),
        (Choice::Present, Choice::Present),
        (Choice::Present, Choice::Future),
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (short, long) in patterns {
        let grid = bank.time_pref_grid();
        // Within each delay pair the earlier delay is the short one.
        let delays = &bank.time_preference.delays_weeks;
        let items: Vec<TimePrefItem> = grid
            .iter()
            .map(|cell| {
                let pos = delays.iter().position(|d| *d == cell.t_weeks).unwrap();
                TimePrefItem { cell: *cell, choice: if pos % 2 == 0 { short } else { long } }
            })
            .collect();
        let blocks = blocks_from_responses(&items).map_err(|e| e.to_string())?;
        ensure(blocks.len() == 6, || format!("{} blocks", blocks.len()))?;
        for b in &blocks {
            let est = block_discount_rate(b);
            let t = if (short, long) == (Choice::Future, Choice::Future) { b.t_long } else { b.t_short };
            ensure(est.t_weeks == t, || format!("block {}: attributed {} weeks, expected {t}", b.block_id, est.t_weeks))?;
            let gap = (est.d.powi(t as i32) * b.m.0 as f64 - b.p.0 as f64).abs();
            ensure(gap < 1e-9, || format!("block {}: |D^t m - p| = {gap:e}", b.block_id))?;
            worst = worst.max(gap);
            checked += 1;
        }
    }
    let spot = ChoiceBlock {
        block_id: 1,
        m: Dollars(25),
        p: Dollars(21),
        t_short: 1,
        t_long: 2,
        choice_short: Choice::Future,
        choice_long: Choice::Present,
    };
    let est = block_discount_rate(&spot);
    ensure(est.pattern == Pattern::FP && est.d == 0.84, || format!("spot value {} ({:?})", est.d, est.pattern))?;
    Ok(format!("{checked} pattern x block cases, max gap {worst:.1e}; spot D = {}", est.d))
}

fn random_design(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = rng.random_range(1..=8);
    let n = rng.random_range(k + 2..=50);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..k)
                .map(|j| if j == 0 { 1.0 } else { (rng.random_range(-4000..=4000) as f64) / 256.0 })
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| rng.random_range(-10_000..=10_000) as f64 / 64.0).collect();
    (x, y)
}

fn design_from(x: &[Vec<f64>], y: &[f64]) -> DesignMatrix {
    let k = x[0].len();
    let m = DMatrix::from_fn(x.len(), k, |i, j| x[i][j]);
    DesignMatrix::new((0..k).map(|j| format!("x{j}")).collect(), m, DVector::from_column_slice(y))
}

fn ols_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut fitted = 0;
    while fitted < 500 {
        let (x, y) = random_design(&mut rng);
        let exact_x: Vec<Vec<BigRational>> = x.iter().map(|r| r.iter().map(|v| rat(*v)).collect()).collect();
        let exact_y: Vec<BigRational> = y.iter().map(|v| rat(*v)).collect();
        let Some(beta) = normal_equations(&exact_x, &exact_y) else { continue };
        let fit = ols_fit(&design_from(&x, &y), FitOptions::default()).map_err(|e| format!("instance {fitted}: {e}"))?;
        let diff = max_abs_diff(&fit.coefficients, &beta);
        ensure(diff < 1e-8, || format!("instance {fitted}: coefficient gap {diff:e}"))?;
        worst = worst.max(diff);
        fitted += 1;
    }

    let x = vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 4.0]];
    let y = vec![1.0, 3.0, 2.0];
    let exact_x: Vec<Vec<BigRational>> = x.iter().map(|r| r.iter().map(|v| rat(*v)).collect()).collect();
    let exact_y: Vec<BigRational> = y.iter().map(|v| rat(*v)).collect();
    let reference = hc1_by_definition(&exact_x, &exact_y);
    let fit = ols_fit(&design_from(&x, &y), FitOptions::default()).map_err(|e| e.to_string())?;
    let mut hc_gap: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            hc_gap = hc_gap.max((fit.covariance[i][j] - to_f64(&reference[i][j])).abs());
        }
    }
    ensure(hc_gap < 1e-10, || format!("HC1 gap {hc_gap:e}"))?;
    Ok(format!("500 instances, max coefficient gap {worst:.1e}; HC1 3-point gap {hc_gap:.1e}"))
}

fn fixed_effects() -> Check {
    let means = [15.8, 20.2, -15.7, 5.0, 7.3];
    let spread = [-3.0, 1.5, -0.25, 1.75];
    let mut question = Vec::new();
    let mut score = Vec::new();
    for (q, m) in means.iter().enumerate() {
        for s in spread {
            question.push((q + 1).to_string());
            score.push(m + s);
        }
    }
    let mut ds = Dataset::new();
    ds.push_text("question", &question);
    ds.push_numeric("score", &score);
    ds.push_numeric("high_trust", &vec![0.0; score.len()]);
    // With H identically zero the treatment column carries no information and
    // the model reduces to question fixed effects.
    let fit = ols_fit(&build_design(&ds, &ModelSpec::new("score").fixed_effect("question")).map_err(|e| e.to_string())?, FitOptions::default())
        .map_err(|e| e.to_string())?;
    let base = fit.coef(INTERCEPT).ok_or("no intercept")?;
    let mut worst: f64 = (base - means[0]).abs();
    for (q, m) in means.iter().enumerate().skip(1) {
        let shift = fit.coef(&format!("question={}", q + 1)).ok_or_else(|| format!("no dummy for question {}", q + 1))?;
        worst = worst.max((base + shift - m).abs());
    }
    ensure(worst < 1e-9, || format!("question means off by {worst:e}"))?;
    let with_h = build_design(&ds, &ModelSpec::new("score").treatment("high_trust").fixed_effect("question"));
    ensure(with_h.is_err(), || "an all-zero treatment column should be flagged as not identified".into())?;
    Ok(format!("question means recovered within {worst:.1e}"))
}

fn parallel_map<T: Send, R: Send>(items: Vec<T>, f: impl Fn(T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(threads);
    let mut items = items;
    let mut chunks = Vec::new();
    while !items.is_empty() {
        let rest = items.split_off(chunk.min(items.len()));
        chunks.push(std::mem::replace(&mut items, rest));
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = chunks.into_iter().map(|c| s.spawn(|| c.into_iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn end_to_end() -> Check {
    let big = run_experiment(&SimulationConfig::new(2000, 1).effects(Effects { trust: 4.5, ..Effects::default() }), None)
        .map_err(|e| e.to_string())?;
    let trust = big.report.recovery("trust").and_then(|r| r.estimate).ok_or("trust effect not estimated")?;
    ensure((4.0..=5.0).contains(&trust), || format!("n = 2000 trust coefficient {trust:.4}"))?;
    ensure(big.report.rows == [5 * 2000, 6 * 2000, 2 * 2000], || format!("n = 2000 rows {:?}", big.report.rows))?;

    let n = 400;
    let covered: Vec<Result<bool, String>> = parallel_map((0..100u64).collect(), |seed| {
        let exp = run_experiment(&SimulationConfig::new(n, seed), None).map_err(|e| e.to_string())?;
        exp.report.recovery("discount").and_then(|r| r.covered).ok_or_else(|| format!("seed {seed}: discount not estimated"))
    });
    let hits = covered.into_iter().collect::<Result<Vec<bool>, String>>()?.into_iter().filter(|c| *c).count();
    ensure(hits >= 93, || format!("discount CI covered 0 in {hits}/100 runs"))?;

    let small = run_experiment(&SimulationConfig::new(102, 7), None).map_err(|e| e.to_string())?;
    ensure(small.report.rows == [510, 612, 204], || format!("n = 102 rows {:?}", small.report.rows))?;
    Ok(format!("trust {trust:.3} at n = 2000; discount coverage {hits}/100 at n = {n}; n = 102 rows 510/612/204"))
}

fn round_trip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seed = 31;
    let config = SimulationConfig::new(100, seed);
    let sink = JsonlSink::create(dir.path().join("events")).map_err(|e| e.to_string())?;
    let live = run_experiment(&config, Some(sink)).map_err(|e| e.to_string())?;

    let logged = read_log_dir(&dir.path().join("events")).map_err(|e| e.to_string())?;
    ensure(logged.as_slice() == live.service.events(), || "event log on disk differs from memory".into())?;

    let mut by_subject: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for rec in &logged {
        if let Some(id) = &rec.subject_id {
            by_subject.entry(id.clone()).or_default().push(rec.event.clone());
        }
    }
    ensure(by_subject.len() == 100, || format!("{} subjects in the log", by_subject.len()))?;
    for (id, events) in &by_subject {
        let flow = SubjectFlow::replay(id.clone(), events).map_err(|e| format!("{id}: {e}"))?;
        ensure(Some(&flow) == live.service.flow(id), || format!("{id}: replayed flow differs"))?;
    }

    let service_config = ServiceConfig { seed, ..config.service.clone() };
    let restored = ExperimentService::restore(service_config, config.strategy.clone(), config.bank.clone(), &logged)
        .map_err(|e| e.to_string())?;
    ensure(restored.flows() == live.service.flows(), || "restored flows differ".into())?;
    let re_export = restored.export().map_err(|e| e.to_string())?;
    ensure(re_export == live.tables, || "re-export is not byte-identical".into())?;

    let again = run_experiment(&config, None).map_err(|e| e.to_string())?;
    ensure(again.tables == live.tables, || "same seed gave a different export".into())?;
    Ok(format!("{} events, 100 flows replayed field-identical, export byte-identical", logged.len()))
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { name: "dominance invariant", budget: Duration::from_secs(5), run: dominance },
        Criterion { name: "strategy cells at x = 5", budget: Duration::from_secs(1), run: strategy_cells },
        Criterion { name: "send support law", budget: Duration::from_secs(5), run: send_support },
        Criterion { name: "discount-rate oracle", budget: Duration::from_secs(1), run: discount_oracle },
        Criterion { name: "OLS oracle equivalence", budget: Duration::from_secs(10), run: ols_oracle },
        Criterion { name: "fixed-effects fixture", budget: Duration::from_secs(1), run: fixed_effects },
        Criterion { name: "end-to-end recovery", budget: Duration::from_secs(120), run: end_to_end },
        Criterion { name: "event-sourcing round trip", budget: Duration::from_secs(30), run: round_trip },
    ];
    let mut failed = 0;
    for c in criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > c.budget => Err(format!("{detail}; took {took:.2?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {:<28} {:>9.2?}  {detail}", c.name, took),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {:<28} {:>9.2?}  {reason}", c.name, took);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
