use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetError};
use super::EconometricsError;

pub const INTERCEPT: &str = "(intercept)";

/// A factor level crossed with the treatment dummy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub factor: String,
    pub level: String,
}

/// Which regressors enter a model. Factors are dummy coded with the reference
/// level omitted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    pub outcome: String,
    /// 0/1 column for the High Trust arm.
    pub treatment: Option<String>,
    pub fixed_effect: Option<String>,
    pub factors: Vec<String>,
    pub interactions: Vec<Interaction>,
    /// Overrides of the omitted level, keyed by factor. Default is the
    /// smallest level (numeric order when every level parses as a number).
    pub reference_levels: BTreeMap<String, String>,
}

impl ModelSpec {
    pub fn new(outcome: impl Into<String>) -> Self {
        ModelSpec { outcome: outcome.into(), ..Default::default() }
    }

    pub fn treatment(mut self, column: impl Into<String>) -> Self {
        self.treatment = Some(column.into());
        self
    }

    pub fn fixed_effect(mut self, factor: impl Into<String>) -> Self {
        self.fixed_effect = Some(factor.into());
        self
    }

    pub fn factors<S: Into<String>>(mut self, factors: impl IntoIterator<Item = S>) -> Self {
        self.factors.extend(factors.into_iter().map(Into::into));
        self
    }

    pub fn interact(mut self, factor: impl Into<String>, level: impl Into<String>) -> Self {
        self.interactions.push(Interaction { factor: factor.into(), level: level.into() });
        self
    }

    pub fn reference(mut self, factor: impl Into<String>, level: impl Into<String>) -> Self {
        self.reference_levels.insert(factor.into(), level.into());
        self
    }

    fn all_factors(&self) -> impl Iterator<Item = &String> {
        self.fixed_effect.iter().chain(&self.factors)
    }

    fn used_columns(&self) -> Vec<&str> {
        let mut cols = vec![self.outcome.as_str()];
        cols.extend(self.treatment.as_deref());
        cols.extend(self.all_factors().map(String::as_str));
        cols.extend(self.interactions.iter().map(|i| i.factor.as_str()));
        cols.dedup();
        cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Rows removed by listwise deletion.
    pub dropped_rows: usize,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: DVector<f64>) -> Self {
        assert_eq!(names.len(), x.ncols(), "one name per column");
        assert_eq!(x.nrows(), y.len(), "one outcome per row");
        DesignMatrix { names, x, y, dropped_rows: 0 }
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Names of columns that are (numerically) linear combinations of
    /// earlier columns.
    pub fn aliased_columns(&self) -> Vec<String> {
        aliased(&self.x).into_iter().map(|j| self.names[j].clone()).collect()
    }
}

/// Sequential Gram-Schmidt: column `j` is aliased when almost nothing is left
/// of it after projecting out the earlier non-aliased columns.
pub(crate) fn aliased(x: &DMatrix<f64>) -> Vec<usize> {
    const TOL: f64 = 1e-9;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for j in 0..x.ncols() {
        let original = x.column(j).into_owned();
        let scale = original.norm();
        let mut v = original;
        // Two passes keep the projection accurate for nearly dependent columns.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let left = v.norm();
        if scale == 0.0 || left <= TOL * scale {
            out.push(j);
        } else {
            basis.push(v / left);
        }
    }
    out
}

fn sorted_levels(values: &[&str]) -> Vec<String> {
    let mut levels: Vec<String> = values.iter().map(|s| s.to_string()).collect();
    levels.sort();
    levels.dedup();
    let numeric: Option<Vec<f64>> = levels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut pairs: Vec<(f64, String)> = nums.into_iter().zip(levels).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        levels = pairs.into_iter().map(|(_, l)| l).collect();
    }
    levels
}

/// Builds `[intercept, H, fixed-effect dummies, factor dummies, interactions]`.
pub fn build_design(data: &Dataset, spec: &ModelSpec) -> Result<DesignMatrix, EconometricsError> {
    data.require(&spec.used_columns())?;
    for i in &spec.interactions {
        if spec.treatment.is_none() {
            return Err(EconometricsError::InteractionWithoutTreatment(i.factor.clone()));
        }
    }

    let outcome = data.numeric(&spec.outcome)?;
    let treatment = spec.treatment.as_deref().map(|c| data.numeric(c)).transpose()?;
    let text = |name: &str| data.column(name).expect("required above");

    let complete: Vec<usize> = (0..data.n_rows())
        .filter(|&r| {
            outcome[r].is_some()
                && treatment.as_ref().is_none_or(|t| t[r].is_some())
                && spec.used_columns().iter().all(|c| text(c)[r].is_some())
        })
        .collect();
    let n = complete.len();

    let mut names = vec![INTERCEPT.to_string()];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];

    let h: Option<Vec<f64>> = treatment.map(|t| complete.iter().map(|&r| t[r].expect("complete row")).collect());
    if let (Some(name), Some(h)) = (&spec.treatment, &h) {
        if let Some((row, v)) = h.iter().enumerate().find(|(_, v)| **v != 0.0 && **v != 1.0) {
            return Err(EconometricsError::Dataset(DatasetError::NotNumeric {
                column: name.clone(),
                row: complete[row],
                value: format!("{v} (treatment must be 0 or 1)"),
            }));
        }
        names.push(name.clone());
        cols.push(h.clone());
    }

    for factor in spec.all_factors() {
        let values: Vec<&str> = complete.iter().map(|&r| text(factor)[r].as_deref().expect("complete row")).collect();
        let levels = sorted_levels(&values);
        let reference = match spec.reference_levels.get(factor) {
            Some(level) if levels.contains(level) => level.clone(),
            Some(level) => {
                return Err(EconometricsError::UnknownLevel { factor: factor.clone(), level: level.clone() });
            }
            None => match levels.first() {
                Some(l) => l.clone(),
                None => continue,
            },
        };
        for level in levels.iter().filter(|l| **l != reference) {
            names.push(format!("{factor}={level}"));
            cols.push(values.iter().map(|v| if v == level { 1.0 } else { 0.0 }).collect());
        }
    }

    for inter in &spec.interactions {
        let h = h.as_ref().expect("checked above");
        let values = text(&inter.factor);
        names.push(format!("{}={} x {}", inter.factor, inter.level, spec.treatment.as_deref().unwrap_or("H")));
        cols.push(
            complete
                .iter()
                .zip(h)
                .map(|(&r, hv)| if values[r].as_deref() == Some(inter.level.as_str()) { *hv } else { 0.0 })
                .collect(),
        );
    }

    let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let y = DVector::from_iterator(n, complete.iter().map(|&r| outcome[r].expect("complete row")));
    let design = DesignMatrix { names, x, y, dropped_rows: data.n_rows() - n };

    let aliased = design.aliased_columns();
    if !aliased.is_empty() {
        return Err(EconometricsError::RankDeficient(aliased));
    }
    Ok(design)
}
