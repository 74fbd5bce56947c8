//! Design matrices, least squares with robust standard errors, and
//! regression tables.

mod dataset;
mod design;
mod ols;
mod table;

use thiserror::Error;

pub use dataset::{Dataset, DatasetError};
pub use design::{build_design, DesignMatrix, Interaction, ModelSpec, INTERCEPT};
pub use ols::{ols_fit, robust_covariance, xtx_inverse, FitOptions, HcVariant, Reference, RegressionResult};
pub use table::{regression_table, stars, RegressionTable, TableCell, TableRow};

#[derive(Debug, Error)]
pub enum EconometricsError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("design is rank deficient; aliased column(s): {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("need more observations than parameters (n = {n}, k = {k})")]
    TooFewObservations { n: usize, k: usize },
    #[error("X'X is singular")]
    SingularCrossProduct,
    #[error("interaction on {0} requires a treatment column")]
    InteractionWithoutTreatment(String),
    #[error("reference level {level:?} does not occur in factor {factor}")]
    UnknownLevel { factor: String, level: String },
}

impl PartialEq for EconometricsError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}
