use std::fmt::Write as _;

use serde::Serialize;

use super::ols::RegressionResult;

/// Significance marks: `**` below 1%, `*` below 5%, `+` below 10%.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.10 {
        "+"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub coef: f64,
    pub se: f64,
    pub p: f64,
    pub stars: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub name: String,
    /// One entry per column; `None` when the regressor is absent there.
    pub cells: Vec<Option<TableCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
    pub n: Vec<Option<usize>>,
    pub adj_r_squared: Vec<Option<f64>>,
    pub notes: Vec<String>,
}

/// Side-by-side table; rows are the union of regressors in first-seen order.
pub fn regression_table(title: impl Into<String>, results: &[(String, &RegressionResult)]) -> RegressionTable {
    let mut table = RegressionTable {
        title: title.into(),
        columns: Vec::new(),
        rows: Vec::new(),
        n: Vec::new(),
        adj_r_squared: Vec::new(),
        notes: Vec::new(),
    };
    for (label, result) in results {
        table.push_column(label.clone(), result);
    }
    table
}

impl RegressionTable {
    pub fn push_column(&mut self, label: String, result: &RegressionResult) {
        let col = self.columns.len();
        self.columns.push(label);
        for row in &mut self.rows {
            row.cells.push(None);
        }
        for (i, name) in result.names.iter().enumerate() {
            let cell = TableCell {
                coef: result.coefficients[i],
                se: result.std_errors[i],
                p: result.p_values[i],
                stars: stars(result.p_values[i]),
            };
            match self.rows.iter_mut().find(|r| &r.name == name) {
                Some(row) => row.cells[col] = Some(cell),
                None => {
                    let mut cells = vec![None; col + 1];
                    cells[col] = Some(cell);
                    self.rows.push(TableRow { name: name.clone(), cells });
                }
            }
        }
        self.n.push(Some(result.n));
        self.adj_r_squared.push(Some(result.adj_r_squared));
    }

    /// Adds an empty column for a specification that could not be estimated.
    pub fn push_skipped(&mut self, label: String, reason: &str) {
        self.notes.push(format!("{label}: {reason}"));
        self.columns.push(label);
        for row in &mut self.rows {
            row.cells.push(None);
        }
        self.n.push(None);
        self.adj_r_squared.push(None);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn render_text(&self) -> String {
        const W: usize = 16;
        let label_w = self.rows.iter().map(|r| r.name.len()).chain([18]).max().unwrap_or(18);
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let rule = "-".repeat(label_w + W * self.columns.len());
        let _ = writeln!(out, "{rule}");
        let _ = write!(out, "{:<label_w$}", "");
        for c in &self.columns {
            let _ = write!(out, "{c:>W$}");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{rule}");
        for row in &self.rows {
            let _ = write!(out, "{:<label_w$}", row.name);
            for cell in &row.cells {
                let s = cell.as_ref().map(|c| format!("{:.3}{}", c.coef, c.stars)).unwrap_or_default();
                let _ = write!(out, "{s:>W$}");
            }
            let _ = writeln!(out);
            let _ = write!(out, "{:<label_w$}", "");
            for cell in &row.cells {
                let s = cell.as_ref().map(|c| format!("({:.3})", c.se)).unwrap_or_default();
                let _ = write!(out, "{s:>W$}");
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out, "{rule}");
        let _ = write!(out, "{:<label_w$}", "N");
        for n in &self.n {
            let s = n.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
            let _ = write!(out, "{s:>W$}");
        }
        let _ = writeln!(out);
        let _ = write!(out, "{:<label_w$}", "Adjusted R2");
        for r in &self.adj_r_squared {
            let s = r.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into());
            let _ = write!(out, "{s:>W$}");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{rule}");
        let _ = writeln!(out, "Robust standard errors in parentheses. ** p<0.01, * p<0.05, + p<0.1");
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::{FitOptions, HcVariant};

    fn result(names: &[&str], p: f64) -> RegressionResult {
        let k = names.len();
        RegressionResult {
            names: names.iter().map(|s| s.to_string()).collect(),
            coefficients: vec![1.0; k],
            covariance: vec![vec![0.0; k]; k],
            std_errors: vec![0.5; k],
            classical_std_errors: vec![0.5; k],
            t_stats: vec![2.0; k],
            p_values: vec![p; k],
            r_squared: 0.1,
            adj_r_squared: 0.05,
            n: 10,
            options: FitOptions { hc: HcVariant::HC1, ..Default::default() },
        }
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.049), "*");
        assert_eq!(stars(0.05), "+");
        assert_eq!(stars(0.0099), "**");
        assert_eq!(stars(0.2), "");
    }

    #[test]
    fn rows_are_unioned() {
        let a = result(&["(intercept)", "h"], 0.3);
        let b = result(&["(intercept)", "age=2"], 0.001);
        let t = regression_table("T", &[("(1)".into(), &a), ("(2)".into(), &b)]);
        assert_eq!(t.columns, vec!["(1)", "(2)"]);
        assert_eq!(t.rows.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), vec!["(intercept)", "h", "age=2"]);
        assert!(t.rows[1].cells[1].is_none());
        assert!(t.rows[2].cells[0].is_none());
        assert_eq!(t.rows[2].cells[1].as_ref().unwrap().stars, "**");
        let text = t.render_text();
        assert!(text.contains("age=2"));
        assert!(text.contains("(0.500)"));
        assert!(t.to_json().contains("\"adj_r_squared\""));
    }

    #[test]
    fn four_columns() {
        let r = result(&["(intercept)", "high_trust"], 0.04);
        let cols: Vec<(String, &RegressionResult)> = (1..=4).map(|i| (format!("({i})"), &r)).collect();
        let t = regression_table("Trust", &cols);
        assert_eq!(t.columns.len(), 4);
        assert!(t.rows.iter().all(|row| row.cells.len() == 4));
    }

    #[test]
    fn skipped_column_keeps_shape() {
        let r = result(&["(intercept)"], 0.5);
        let mut t = regression_table("T", &[("(1)".into(), &r)]);
        t.push_skipped("(2)".into(), "demographic columns missing");
        assert_eq!(t.rows[0].cells.len(), 2);
        assert_eq!(t.n, vec![Some(10), None]);
        assert!(t.render_text().contains("note: (2): demographic columns missing"));
    }
}
