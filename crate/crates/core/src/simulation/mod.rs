//! Synthetic subjects driven through the service, plus the analysis that
//! turns an export into regression tables.

pub mod analysis;
pub mod policy;
pub mod run;

pub use analysis::{analyze, analyze_dir, AnalysisError, AnalysisReport};
pub use policy::{Effects, EffectsError, EffectsFile, Population, Spread, SubjectPolicy};
pub use run::{
    drive_subject, run_experiment, simulate_subject, Experiment, Recovery, SimError, SimReport, SimulationConfig,
};
