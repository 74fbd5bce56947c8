use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bot::{StrategyConfig, Treatment};
use crate::econometrics::{Dataset, DatasetError, FitOptions, RegressionTable};
use crate::questionnaire::{QuestionBank, RawAnswer};
use crate::session::{
    EventRecord, ExperimentService, ExportTables, JsonlSink, LogicalClock, ServiceConfig, ServiceError, Stage,
};

use super::analysis::{analyze, AnalysisError, AnalysisReport, TREATMENT};
use super::policy::{Effects, EffectsFile, SubjectPolicy};
use crate::game::Role;

const POLICY_SALT: u64 = 0x706f_6c69_6379_0001;
const ANSWER_SALT: u64 = 0x616e_7377_6572_0001;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("need at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("re-reading the export: {0}")]
    Dataset(#[from] DatasetError),
}

/// Everything an experiment run needs.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n: usize,
    pub seed: u64,
    pub effects: EffectsFile,
    pub service: ServiceConfig,
    pub strategy: StrategyConfig,
    pub bank: QuestionBank,
    pub fit: FitOptions,
}

impl SimulationConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SimulationConfig {
            n,
            seed,
            effects: EffectsFile::default(),
            service: ServiceConfig::default(),
            strategy: StrategyConfig::shipped(),
            bank: QuestionBank::shipped(),
            fit: FitOptions::default(),
        }
    }

    pub fn effects(mut self, effects: Effects) -> Self {
        self.effects.effects = effects;
        self
    }
}

/// How well one planted effect came back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub effect: String,
    /// Table and column the estimate is read from.
    pub source: String,
    pub planted: f64,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Whether the 95% interval contains the planted value.
    pub covered: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n: usize,
    pub seed: u64,
    pub planted: Effects,
    pub high_trust_subjects: usize,
    pub low_trust_subjects: usize,
    pub rows: [usize; 3],
    pub recoveries: Vec<Recovery>,
    pub notes: Vec<String>,
}

impl SimReport {
    pub fn recovery(&self, effect: &str) -> Option<&Recovery> {
        self.recoveries.iter().find(|r| r.effect == effect)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug)]
pub struct Experiment {
    pub service: ExperimentService,
    pub tables: ExportTables,
    pub analysis: AnalysisReport,
    pub report: SimReport,
}

/// Plays one registered subject through every stage using `policy`.
pub fn drive_subject(
    svc: &mut ExperimentService,
    subject_id: &str,
    policy: &SubjectPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<(), ServiceError> {
    svc.start(subject_id)?;
    let high = svc.flow(subject_id).and_then(|f| f.treatment) == Some(Treatment::HighTrust);
    let mut view = svc.acknowledge_instructions(subject_id)?;
    loop {
        view = match view.stage {
            Stage::Practice | Stage::Game => {
                let p = view.pending.as_ref().expect("game stages always have a pending round");
                match p.role {
                    Role::A => svc.submit_send(subject_id, policy.send(view.endowment))?,
                    Role::B => svc.submit_return(subject_id, policy.give_back(p.max_input))?,
                }
            }
            Stage::TimePref => {
                let answers =
                    view.time_pref.iter().map(|item| RawAnswer::from(policy.choose(item.cell, high, rng))).collect();
                svc.submit_time_pref(subject_id, answers)?
            }
            Stage::Trust => {
                let answers = view
                    .trust
                    .iter()
                    .map(|q| RawAnswer::from(policy.trust_answer(q.id, q.reverse_coded, high, rng)))
                    .collect();
                svc.submit_trust(subject_id, answers)?
            }
            Stage::Certainty => {
                let answers = view.certainty.iter().map(|_| policy.certainty_answer(high, rng)).collect();
                svc.submit_certainty(subject_id, answers)?
            }
            Stage::Demographics => svc.submit_demographics(subject_id, policy.demographics)?,
            Stage::Debrief => svc.acknowledge_debrief(subject_id, policy.suspects_bot)?,
            Stage::Done => return Ok(()),
            Stage::Instructions => svc.acknowledge_instructions(subject_id)?,
        };
    }
}

/// Runs one subject with a fixed arm in a fresh single-session service and
/// returns its complete event stream.
pub fn simulate_subject(
    policy: &SubjectPolicy,
    treatment: Treatment,
    seed: u64,
) -> Result<Vec<EventRecord>, ServiceError> {
    let config = ServiceConfig { slot_times: vec!["10:00".into()], seed, ..ServiceConfig::default() };
    let mut svc = ExperimentService::new(config, StrategyConfig::shipped(), QuestionBank::shipped())?
        .with_clock(LogicalClock::default());
    svc.open_session(0)?;
    let id = svc.register(0)?;
    svc.assign_treatment_as(&id, treatment)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ANSWER_SALT);
    drive_subject(&mut svc, &id, policy, &mut rng)?;
    Ok(svc.events().iter().filter(|r| r.subject_id.as_deref() == Some(id.as_str())).cloned().collect())
}

fn recovery(effect: &str, planted: f64, table: &RegressionTable, column: usize) -> Recovery {
    let source = format!("{} {}", table.title, table.columns.get(column).map_or("", String::as_str));
    let cell = table.rows.iter().find(|r| r.name == TREATMENT).and_then(|r| r.cells.get(column)).and_then(Option::as_ref);
    let z = 1.959963984540054;
    match cell {
        Some(c) => {
            let (lo, hi) = (c.coef - z * c.se, c.coef + z * c.se);
            Recovery {
                effect: effect.into(),
                source,
                planted,
                estimate: Some(c.coef),
                std_error: Some(c.se),
                ci_low: Some(lo),
                ci_high: Some(hi),
                covered: Some(lo <= planted && planted <= hi),
            }
        }
        None => Recovery {
            effect: effect.into(),
            source,
            planted,
            estimate: None,
            std_error: None,
            ci_low: None,
            ci_high: None,
            covered: None,
        },
    }
}

/// Simulates `config.n` subjects through the service, exports, analyses, and
/// compares the recovered treatment effects with the planted ones.
pub fn run_experiment(config: &SimulationConfig, sink: Option<JsonlSink>) -> Result<Experiment, SimError> {
    if config.n < 2 {
        return Err(SimError::TooFewSubjects(config.n));
    }
    config.effects.population.validate().map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
    let service_config = ServiceConfig { seed: config.seed, ..config.service.clone() };
    let mut svc = ExperimentService::new(service_config, config.strategy.clone(), config.bank.clone())?
        .with_clock(LogicalClock::new(0, 1_000));
    if let Some(sink) = sink {
        svc = svc.with_sink(sink);
    }
    let slots = svc.sessions().len();
    for slot in 0..slots {
        svc.open_session(slot)?;
    }
    for i in 0..config.n {
        let mut policy_rng = ChaCha8Rng::seed_from_u64(config.seed ^ POLICY_SALT);
        policy_rng.set_stream(i as u64);
        let policy = SubjectPolicy::draw(&config.effects.population, config.effects.effects, &mut policy_rng);
        let id = svc.register(i % slots)?;
        drive_subject(&mut svc, &id, &policy, &mut policy_rng)?;
    }
    for slot in 0..slots {
        svc.close_session(slot)?;
    }

    let tables = svc.export()?;
    let trust = Dataset::from_reader(tables.trust_long.as_bytes())?;
    let discount = Dataset::from_reader(tables.discount_long.as_bytes())?;
    let certainty = Dataset::from_reader(tables.certainty_long.as_bytes())?;
    let analysis = analyze(&trust, &discount, &certainty, config.fit)?;

    let planted = config.effects.effects;
    let high = svc.flows().values().filter(|f| f.treatment == Some(Treatment::HighTrust)).count();
    let recoveries = vec![
        recovery("trust", planted.trust, &analysis.trust, 0),
        recovery("discount", planted.discount, &analysis.discount, 0),
        recovery("certainty", planted.certainty, &analysis.certainty, 0),
    ];
    let mut notes: Vec<String> = recoveries
        .iter()
        .filter(|r| r.estimate.is_none())
        .map(|r| format!("{} effect could not be estimated", r.effect))
        .collect();
    notes.extend(analysis.trust.notes.iter().chain(&analysis.discount.notes).chain(&analysis.certainty.notes).cloned());
    let report = SimReport {
        n: config.n,
        seed: config.seed,
        planted,
        high_trust_subjects: high,
        low_trust_subjects: config.n - high,
        rows: tables.row_counts(),
        recoveries,
        notes,
    };
    Ok(Experiment { service: svc, tables, analysis, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::SubjectFlow;
    use crate::simulation::policy::Population;

    #[test]
    fn single_subject_stream_replays_to_done() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policy = SubjectPolicy::draw(&Population::default(), Effects::default(), &mut rng);
        let events = simulate_subject(&policy, Treatment::LowTrust, 5).unwrap();
        let kinds: Vec<_> = events.iter().map(|r| r.event.clone()).collect();
        let flow = SubjectFlow::replay(events[0].subject_id.clone().unwrap(), &kinds).unwrap();
        assert!(flow.is_done());
        assert_eq!(flow.treatment, Some(Treatment::LowTrust));
    }

    #[test]
    fn patient_policy_sends_per_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policy = SubjectPolicy { theta: 1.0, ..SubjectPolicy::draw(&Population::default(), Effects::default(), &mut rng) };
        let events = simulate_subject(&policy, Treatment::HighTrust, 9).unwrap();
        let kinds: Vec<_> = events.iter().map(|r| r.event.clone()).collect();
        let flow = SubjectFlow::replay("S0001", &kinds).unwrap();
        let game = flow.game.unwrap();
        assert!(game.scored_rounds().filter(|r| r.role == Role::A).all(|r| r.sent.0 == 10));
    }

    #[test]
    fn two_subjects_degrade_gracefully() {
        let exp = run_experiment(&SimulationConfig::new(2, 3), None).unwrap();
        assert_eq!(exp.report.rows, [10, 12, 4]);
        assert_eq!(exp.analysis.trust.columns.len(), 4);
        assert_eq!(exp.analysis.discount.columns.len(), 6);
        assert_eq!(exp.analysis.certainty.columns.len(), 2);
        assert!(!exp.report.notes.is_empty());
    }

    #[test]
    fn one_subject_is_rejected() {
        assert!(matches!(run_experiment(&SimulationConfig::new(1, 0), None), Err(SimError::TooFewSubjects(1))));
    }

    #[test]
    fn same_seed_same_report() {
        let a = run_experiment(&SimulationConfig::new(30, 11), None).unwrap();
        let b = run_experiment(&SimulationConfig::new(30, 11), None).unwrap();
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.analysis.render_text(), b.analysis.render_text());
    }
}
