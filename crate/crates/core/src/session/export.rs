//! Long-format analysis tables: five trust rows, six discount rows and two
//! certainty rows per finished subject.

use std::io;
use std::path::Path;

use thiserror::Error;

use crate::bot::Treatment;
use crate::estimation::{discount_estimates, EstimationError};
use crate::questionnaire::Demographics;

use super::flow::SubjectFlow;

pub const TRUST_FILE: &str = "trust_long.csv";
pub const DISCOUNT_FILE: &str = "discount_long.csv";
pub const CERTAINTY_FILE: &str = "certainty_long.csv";

const LEAD: [&str; 3] = ["subject_id", "session", "high_trust"];
const TAIL: [&str; 2] = ["suspected_bot", "cumulative_payoff"];

pub const TRUST_COLUMNS: [&str; 3] = ["question", "raw", "score"];
pub const DISCOUNT_COLUMNS: [&str; 8] = ["block_id", "m", "p", "t_weeks", "d", "censoring", "pattern", "non_monotone"];
pub const CERTAINTY_COLUMNS: [&str; 3] = ["horizon_years", "agreement", "certainty"];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("subject {subject}: {source}")]
    Estimation {
        subject: String,
        #[source]
        source: EstimationError,
    },
    #[error("subject {0} is marked done but its responses are incomplete")]
    Incomplete(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot write export: {0}")]
    Io(#[from] io::Error),
}

/// Full header of a table, given its specific columns.
pub fn header(specific: &[&str]) -> Vec<String> {
    LEAD.iter()
        .chain(specific)
        .chain(Demographics::COLUMNS.iter())
        .chain(TAIL.iter())
        .map(|s| s.to_string())
        .collect()
}

/// The three CSV documents, UTF-8 with a header row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportTables {
    pub trust_long: String,
    pub discount_long: String,
    pub certainty_long: String,
    pub subjects: usize,
}

impl ExportTables {
    pub fn row_counts(&self) -> [usize; 3] {
        [&self.trust_long, &self.discount_long, &self.certainty_long].map(|t| t.lines().count().saturating_sub(1))
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(TRUST_FILE), &self.trust_long)?;
        std::fs::write(dir.join(DISCOUNT_FILE), &self.discount_long)?;
        std::fs::write(dir.join(CERTAINTY_FILE), &self.certainty_long)
    }
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ExportError> {
    let bytes = w.into_inner().map_err(|e| ExportError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Exports every flow at stage Done, in the order given.
pub fn export_dataset<'a>(flows: impl IntoIterator<Item = &'a SubjectFlow>) -> Result<ExportTables, ExportError> {
    let mut trust = writer();
    let mut discount = writer();
    let mut certainty = writer();
    trust.write_record(header(&TRUST_COLUMNS))?;
    discount.write_record(header(&DISCOUNT_COLUMNS))?;
    certainty.write_record(header(&CERTAINTY_COLUMNS))?;

    let mut subjects = 0;
    for flow in flows.into_iter().filter(|f| f.is_done()) {
        let r = &flow.responses;
        let (Some(treatment), Some(demo)) = (flow.treatment, r.demographics) else {
            return Err(ExportError::Incomplete(flow.subject_id.clone()));
        };
        if !r.is_complete() {
            return Err(ExportError::Incomplete(flow.subject_id.clone()));
        }
        subjects += 1;
        let lead = [
            flow.subject_id.clone(),
            (flow.slot + 1).to_string(),
            u8::from(treatment == Treatment::HighTrust).to_string(),
        ];
        let tail: Vec<String> = demo
            .codes()
            .iter()
            .map(|c| c.to_string())
            .chain([u8::from(flow.suspected_bot).to_string(), flow.cumulative_payoff().0.to_string()])
            .collect();
        let row = |specific: Vec<String>| -> Vec<String> {
            lead.iter().cloned().chain(specific).chain(tail.iter().cloned()).collect()
        };

        for item in &r.trust {
            trust.write_record(row(vec![item.question_id.to_string(), item.raw.to_string(), item.coded.to_string()]))?;
        }
        let estimates = discount_estimates(&r.time_pref)
            .map_err(|source| ExportError::Estimation { subject: flow.subject_id.clone(), source })?;
        for e in &estimates {
            discount.write_record(row(vec![
                e.block_id.to_string(),
                e.m.0.to_string(),
                e.p.0.to_string(),
                e.t_weeks.to_string(),
                e.d.to_string(),
                e.censoring.code().to_string(),
                e.pattern.to_string(),
                u8::from(e.non_monotone()).to_string(),
            ]))?;
        }
        for c in &r.certainty {
            certainty.write_record(row(vec![
                c.horizon_years.to_string(),
                c.agreement.to_string(),
                c.certainty.to_string(),
            ]))?;
        }
    }

    Ok(ExportTables {
        trust_long: finish(trust)?,
        discount_long: finish(discount)?,
        certainty_long: finish(certainty)?,
        subjects,
    })
}
