//! The three analysis tables built from the exported CSV files.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::econometrics::{
    build_design, ols_fit, Dataset, DatasetError, EconometricsError, FitOptions, ModelSpec, RegressionResult,
    RegressionTable,
};
use crate::questionnaire::Demographics;
use crate::session::{CERTAINTY_FILE, DISCOUNT_FILE, TRUST_FILE};

pub const TREATMENT: &str = "high_trust";
/// Majors crossed with the treatment in the interaction specifications.
pub const INTERACTED_MAJORS: [&str; 2] = ["economics", "psychology"];

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{file}: {source}")]
    Schema {
        file: String,
        #[source]
        source: DatasetError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub trust: RegressionTable,
    pub discount: RegressionTable,
    pub certainty: RegressionTable,
}

impl AnalysisReport {
    pub fn render_text(&self) -> String {
        [&self.trust, &self.discount, &self.certainty].map(|t| t.render_text()).join("\n")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn load(dir: &Path, file: &str, required: &[&str]) -> Result<Dataset, AnalysisError> {
    let wrap = |source| AnalysisError::Schema { file: file.to_string(), source };
    let ds = Dataset::from_path(&dir.join(file)).map_err(wrap)?;
    ds.require(required).map_err(wrap)?;
    Ok(ds)
}

/// Reads the three CSV files from `dir` and fits every specification.
pub fn analyze_dir(dir: &Path, options: FitOptions) -> Result<AnalysisReport, AnalysisError> {
    let trust = load(dir, TRUST_FILE, &["subject_id", TREATMENT, "question", "score"])?;
    let discount = load(dir, DISCOUNT_FILE, &["subject_id", TREATMENT, "d"])?;
    let certainty = load(dir, CERTAINTY_FILE, &["subject_id", TREATMENT, "certainty"])?;
    analyze(&trust, &discount, &certainty, options)
}

pub fn analyze(
    trust: &Dataset,
    discount: &Dataset,
    certainty: &Dataset,
    options: FitOptions,
) -> Result<AnalysisReport, AnalysisError> {
    let schema = |file: &str, source| AnalysisError::Schema { file: file.to_string(), source };
    trust.require(&["subject_id", TREATMENT, "question", "score"]).map_err(|e| schema(TRUST_FILE, e))?;
    discount.require(&["subject_id", TREATMENT, "d"]).map_err(|e| schema(DISCOUNT_FILE, e))?;
    certainty.require(&["subject_id", TREATMENT, "certainty"]).map_err(|e| schema(CERTAINTY_FILE, e))?;

    Ok(AnalysisReport {
        trust: trust_table(trust, options),
        discount: discount_table(discount, options).map_err(|e| schema(DISCOUNT_FILE, e))?,
        certainty: certainty_table(certainty, options),
    })
}

fn has_demographics(ds: &Dataset) -> bool {
    Demographics::COLUMNS.iter().all(|c| ds.has_column(c))
}

fn with_demographics(spec: ModelSpec) -> ModelSpec {
    spec.factors(Demographics::COLUMNS)
}

fn with_interactions(spec: ModelSpec) -> ModelSpec {
    INTERACTED_MAJORS.iter().fold(spec, |s, level| s.interact("major", *level))
}

fn fit(ds: &Dataset, spec: &ModelSpec, options: FitOptions) -> Result<RegressionResult, EconometricsError> {
    ols_fit(&build_design(ds, spec)?, options)
}

/// Fits each `(label, spec, data)` column in turn; `None` specs need
/// demographics the data does not have.
fn table(title: &str, columns: Vec<(String, Option<ModelSpec>, &Dataset)>, options: FitOptions) -> RegressionTable {
    let mut t = crate::econometrics::regression_table(title, &[]);
    for (label, spec, data) in columns {
        match spec {
            None => t.push_skipped(label, "demographic columns are missing from the dataset"),
            Some(spec) => match fit(data, &spec, options) {
                Ok(r) => t.push_column(label, &r),
                Err(e) => t.push_skipped(label, &format!("not estimable: {e}")),
            },
        }
    }
    t
}

fn trust_table(ds: &Dataset, options: FitOptions) -> RegressionTable {
    let demo = has_demographics(ds);
    let base = ModelSpec::new("score").treatment(TREATMENT).fixed_effect("question");
    let full = with_interactions(with_demographics(base.clone()));
    let sincere = ds.column("suspected_bot").map(|col| ds.filter_rows(|r| col[r].as_deref() != Some("1")));
    let mut columns = vec![
        ("(1)".to_string(), Some(base.clone()), ds),
        ("(2)".to_string(), demo.then(|| with_demographics(base.clone())), ds),
        ("(3)".to_string(), demo.then(|| full.clone()), ds),
    ];
    if let Some(sub) = &sincere {
        columns.push(("(4)".to_string(), demo.then_some(full), sub));
    }
    let mut t = table("Trust score on treatment, question fixed effects", columns, options);
    match sincere {
        Some(_) => t.notes.push("(4) excludes subjects who reported suspecting a computer counterpart".into()),
        None => t.push_skipped("(4)".into(), "no suspected_bot column to restrict the sample"),
    }
    t
}

fn discount_table(ds: &Dataset, options: FitOptions) -> Result<RegressionTable, DatasetError> {
    let demo = has_demographics(ds);
    let carry: Vec<&str> =
        if demo { [TREATMENT].into_iter().chain(Demographics::COLUMNS).collect() } else { vec![TREATMENT] };
    let per_subject = ds.group_mean("subject_id", "d", &carry)?;
    let base = ModelSpec::new("d").treatment(TREATMENT);
    let columns = vec![
        ("(1)".to_string(), Some(base.clone()), &per_subject),
        ("(2)".to_string(), demo.then(|| with_demographics(base.clone())), &per_subject),
        ("(3)".to_string(), demo.then(|| with_interactions(with_demographics(base.clone()))), &per_subject),
        ("(4)".to_string(), Some(base.clone()), ds),
        ("(5)".to_string(), demo.then(|| with_demographics(base.clone())), ds),
        ("(6)".to_string(), demo.then(|| with_interactions(with_demographics(base.clone()))), ds),
    ];
    let mut t = table("Weekly discount factor on treatment", columns, options);
    t.notes.push("(1)-(3): subject mean of the six block factors; (4)-(6): one row per block".into());
    Ok(t)
}

fn certainty_table(ds: &Dataset, options: FitOptions) -> RegressionTable {
    let demo = has_demographics(ds);
    let base = ModelSpec::new("certainty").treatment(TREATMENT);
    let columns = vec![
        ("(1)".to_string(), Some(base.clone()), ds),
        ("(2)".to_string(), demo.then(|| with_demographics(base)), ds),
    ];
    table("Certainty about the future on treatment", columns, options)
}
