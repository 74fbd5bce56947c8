//! Least squares with heteroskedasticity-consistent covariance.
//!
//! Coefficients come from a Householder QR of the design. The robust
//! covariance is the sandwich `(X'X)^-1 X' diag(e^2) X (X'X)^-1`, scaled by
//! `N / (N - k)` for HC1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::design::{aliased, DesignMatrix};
use super::EconometricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HcVariant {
    HC0,
    #[default]
    HC1,
}

/// Reference distribution for t-statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    #[default]
    Normal,
    /// Student t with `N - k` degrees of freedom.
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    pub hc: HcVariant,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Robust covariance, row-major `k x k`.
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub classical_std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n: usize,
    pub options: FitOptions,
}

impl RegressionResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.std_errors[i])
    }

    pub fn p_value(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.p_values[i])
    }

    /// Two-sided confidence interval at `level` (e.g. 0.95).
    pub fn confidence_interval(&self, name: &str, level: f64) -> Option<(f64, f64)> {
        let i = self.index(name)?;
        let z = critical_value(self.options.reference, self.n - self.names.len(), level);
        let (b, se) = (self.coefficients[i], self.std_errors[i]);
        Some((b - z * se, b + z * se))
    }
}

fn critical_value(reference: Reference, df: usize, level: f64) -> f64 {
    let q = 0.5 + level / 2.0;
    match reference {
        Reference::Normal => Normal::standard().inverse_cdf(q),
        Reference::StudentT => StudentsT::new(0.0, 1.0, df as f64).expect("df > 0").inverse_cdf(q),
    }
}

fn two_sided_p(reference: Reference, df: usize, t: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    let upper = match reference {
        Reference::Normal => Normal::standard().sf(t.abs()),
        Reference::StudentT => StudentsT::new(0.0, 1.0, df as f64).expect("df > 0").sf(t.abs()),
    };
    (2.0 * upper).min(1.0)
}

/// `(X'X)^-1`, failing when `X'X` is singular.
pub fn xtx_inverse(x: &DMatrix<f64>) -> Result<DMatrix<f64>, EconometricsError> {
    if !aliased(x).is_empty() {
        return Err(EconometricsError::SingularCrossProduct);
    }
    let xtx = x.tr_mul(x);
    xtx.cholesky().map(|c| c.inverse()).ok_or(EconometricsError::SingularCrossProduct)
}

/// Sandwich covariance from the design and its OLS residuals.
pub fn robust_covariance(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    variant: HcVariant,
) -> Result<DMatrix<f64>, EconometricsError> {
    let (n, k) = x.shape();
    let bread = xtx_inverse(x)?;
    let mut scaled = x.clone();
    for (mut row, e) in scaled.row_iter_mut().zip(residuals.iter()) {
        row *= *e;
    }
    let meat = scaled.tr_mul(&scaled);
    let mut cov = &bread * meat * &bread;
    if variant == HcVariant::HC1 {
        if n <= k {
            return Err(EconometricsError::TooFewObservations { n, k });
        }
        cov *= n as f64 / (n - k) as f64;
    }
    Ok(cov)
}

pub fn ols_fit(design: &DesignMatrix, options: FitOptions) -> Result<RegressionResult, EconometricsError> {
    let (n, k) = design.x.shape();
    if n <= k {
        return Err(EconometricsError::TooFewObservations { n, k });
    }
    let aliased = design.aliased_columns();
    if !aliased.is_empty() {
        return Err(EconometricsError::RankDeficient(aliased));
    }

    let qr = design.x.clone().qr();
    let qty = qr.q().tr_mul(&design.y);
    let r = qr.r();
    let beta = r.solve_upper_triangular(&qty).ok_or(EconometricsError::SingularCrossProduct)?;

    let fitted = &design.x * &beta;
    let residuals = &design.y - fitted;
    let rss = residuals.norm_squared();
    let mean = design.y.mean();
    let tss: f64 = design.y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / (n - k) as f64;

    let cov = robust_covariance(&design.x, &residuals, options.hc)?;
    let classical = xtx_inverse(&design.x)? * (rss / (n - k) as f64);

    let df = n - k;
    let std_errors: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let t_stats: Vec<f64> = beta.iter().zip(&std_errors).map(|(b, se)| b / se).collect();
    let p_values = t_stats.iter().map(|t| two_sided_p(options.reference, df, *t)).collect();

    Ok(RegressionResult {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        covariance: (0..k).map(|i| (0..k).map(|j| cov[(i, j)]).collect()).collect(),
        std_errors,
        classical_std_errors: (0..k).map(|j| classical[(j, j)].max(0.0).sqrt()).collect(),
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        n,
        options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design(rows: &[&[f64]], y: &[f64]) -> DesignMatrix {
        let k = rows[0].len();
        let x = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        DesignMatrix::new((0..k).map(|j| format!("x{j}")).collect(), x, DVector::from_column_slice(y))
    }

    #[test]
    fn perfect_fit() {
        let d = design(&[&[1.0, 1.0], &[1.0, 2.0], &[1.0, 3.0]], &[1.0, 2.0, 3.0]);
        let r = ols_fit(&d, FitOptions::default()).unwrap();
        assert!(r.coefficients[0].abs() < 1e-12);
        assert!((r.coefficients[1] - 1.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only() {
        let d = design(&[&[1.0], &[1.0], &[1.0]], &[1.0, 1.0, 1.0]);
        let r = ols_fit(&d, FitOptions::default()).unwrap();
        assert!((r.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(r.std_errors[0] < 1e-12);
        assert!(r.covariance.iter().flatten().all(|c| c.abs() < 1e-24));
    }

    #[test]
    fn too_few_rows_and_collinear_columns() {
        let d = design(&[&[1.0, 1.0], &[1.0, 2.0]], &[1.0, 2.0]);
        assert_eq!(ols_fit(&d, FitOptions::default()), Err(EconometricsError::TooFewObservations { n: 2, k: 2 }));
        let d = design(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]], &[1.0, 2.0, 4.0]);
        assert_eq!(ols_fit(&d, FitOptions::default()), Err(EconometricsError::RankDeficient(vec!["x1".into()])));
        assert_eq!(
            robust_covariance(&d.x, &d.y, HcVariant::HC0),
            Err(EconometricsError::SingularCrossProduct)
        );
    }

    // Exact rational evaluation of the sandwich definition.
    fn exact_sandwich(x: &[[i64; 2]], e: &[BigRational], scale: BigRational) -> [[BigRational; 2]; 2] {
        let r = |v: i64| BigRational::from_integer(v.into());
        let mut xtx = [[r(0), r(0)], [r(0), r(0)]];
        let mut meat = [[r(0), r(0)], [r(0), r(0)]];
        for (row, ei) in x.iter().zip(e) {
            for a in 0..2 {
                for b in 0..2 {
                    xtx[a][b] += r(row[a] * row[b]);
                    meat[a][b] += ei * ei * r(row[a] * row[b]);
                }
            }
        }
        let det = &xtx[0][0] * &xtx[1][1] - &xtx[0][1] * &xtx[1][0];
        let inv = [
            [&xtx[1][1] / &det, -&xtx[0][1] / &det],
            [-&xtx[1][0] / &det, &xtx[0][0] / &det],
        ];
        let mul = |a: &[[BigRational; 2]; 2], b: &[[BigRational; 2]; 2]| {
            let mut out = [[r(0), r(0)], [r(0), r(0)]];
            for i in 0..2 {
                for j in 0..2 {
                    for m in 0..2 {
                        out[i][j] += &a[i][m] * &b[m][j];
                    }
                }
            }
            out
        };
        let mut s = mul(&mul(&inv, &meat), &inv);
        for row in s.iter_mut() {
            for v in row.iter_mut() {
                *v *= &scale;
            }
        }
        s
    }

    #[test]
    fn hc1_three_points_by_definition() {
        // (x, y) = (0, 1), (1, 2), (2, 2): b = (7/6, 1/2), e = (-1/6, 1/3, -1/6).
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let exact = exact_sandwich(&[[1, 0], [1, 1], [1, 2]], &[q(-1, 6), q(1, 3), q(-1, 6)], q(3, 1));
        // Frozen by hand: HC0 = [[7/216, -1/72], [-1/72, 1/72]], HC1 = 3 * HC0.
        assert_eq!(exact, [[q(7, 72), q(-1, 24)], [q(-1, 24), q(1, 24)]]);

        let d = design(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0]], &[1.0, 2.0, 2.0]);
        let r = ols_fit(&d, FitOptions::default()).unwrap();
        assert!((r.coefficients[0] - 7.0 / 6.0).abs() < 1e-12);
        assert!((r.coefficients[1] - 0.5).abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                let want = exact[i][j].to_f64().unwrap();
                assert!((r.covariance[i][j] - want).abs() < 1e-10, "({i},{j}) {} vs {want}", r.covariance[i][j]);
            }
        }
        assert!((r.std_errors[1] - (1.0f64 / 24.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hc0_is_hc1_without_scaling() {
        let d = design(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0], &[1.0, 5.0]], &[1.0, 2.0, 2.0, 7.0]);
        let hc0 = ols_fit(&d, FitOptions { hc: HcVariant::HC0, ..Default::default() }).unwrap();
        let hc1 = ols_fit(&d, FitOptions::default()).unwrap();
        for (a, b) in hc0.covariance.iter().flatten().zip(hc1.covariance.iter().flatten()) {
            assert!((b - a * 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn adjusted_r_squared_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![1.0, rng.random::<f64>(), rng.random::<f64>()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[1] * 2.0 - r[2] + rng.random::<f64>()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let r = ols_fit(&design(&refs, &y), FitOptions::default()).unwrap();
        let expected = 1.0 - (1.0 - r.r_squared) * 29.0 / (30.0 - 2.0 - 1.0);
        assert!((r.adj_r_squared - expected).abs() < 1e-14);
        for (se, c) in r.std_errors.iter().zip(&r.covariance).enumerate().map(|(j, (se, row))| (se, row[j])) {
            assert_eq!(*se, c.sqrt());
        }
    }

    #[test]
    fn p_values_and_intervals() {
        assert!((two_sided_p(Reference::Normal, 10, 1.959_963_984_540_054) - 0.05).abs() < 1e-9);
        assert!(two_sided_p(Reference::StudentT, 5, 1.96) > 0.05);
        assert!((critical_value(Reference::Normal, 0, 0.95) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..25).map(|_| (0..4).map(|j| if j == 0 { 1.0 } else { rng.random_range(-3.0..3.0) }).collect()).collect();
        let y: Vec<f64> = (0..25).map(|_| rng.random_range(-10.0..10.0)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let d = design(&refs, &y);
        let r = ols_fit(&d, FitOptions::default()).unwrap();
        let beta = DVector::from_vec(r.coefficients.clone());
        let e = &d.y - &d.x * beta;
        let xte = d.x.tr_mul(&e);
        assert!(xte.iter().all(|v| v.abs() < 1e-10), "{xte}");
    }
}
