//! CSV plumbing: survey responses in, column samples in, analysis reports
//! out.

use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;
use w5cat_core::metrics::{ConsistencyReport, QuestionCell, ResponseDataset};
use w5cat_core::{AssetId, ColumnSample, IngestError};

pub const RESPONSE_COLUMNS: [&str; 5] = ["participant", "mm", "question", "choice", "difficulty"];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Read `participant,mm,question,choice,difficulty` rows. The header must
/// name those columns (in any order); `difficulty` may be empty or absent.
pub fn parse_responses<R: Read>(reader: R) -> Result<ResponseDataset, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(RESPONSE_COLUMNS) {
        match find(name) {
            Some(i) => *slot = i,
            None if name == "difficulty" => *slot = usize::MAX,
            None => {
                return Err(
                    IngestError::MalformedRow { line: 1, reason: format!("header lacks column {name:?}") }.into()
                )
            }
        }
    }
    let mut ds = ResponseDataset::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() != header.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), row.len()),
            }
            .into());
        }
        let field = |i: usize| row.get(i).unwrap_or("");
        ds.push_row(line, field(idx[0]), field(idx[1]), field(idx[2]), field(idx[3]), field(idx[4]))?;
    }
    Ok(ds)
}

/// Values of one named column of a CSV file with a header row.
pub fn read_column<R: Read>(reader: R, asset: AssetId, column: &str) -> Result<ColumnSample, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let i = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| CsvError::MissingColumn(column.to_owned()))?;
    let mut values = Vec::new();
    for row in rdr.records() {
        if let Some(v) = row?.get(i) {
            values.push(v.to_owned());
        }
    }
    Ok(ColumnSample::new(asset, column, values))
}

#[derive(Serialize)]
struct CsvCell<'a> {
    mm: &'a str,
    question: &'a str,
    responses: u64,
    entropy: f64,
    normalized_entropy: f64,
    none_proportion: f64,
    none_modal: bool,
    median_difficulty: Option<f64>,
}

impl<'a> From<&'a QuestionCell> for CsvCell<'a> {
    fn from(c: &'a QuestionCell) -> Self {
        CsvCell {
            mm: &c.mm,
            question: &c.question,
            responses: c.responses,
            entropy: c.entropy,
            normalized_entropy: c.normalized_entropy,
            none_proportion: c.none_proportion,
            none_modal: c.none_modal,
            median_difficulty: c.median_difficulty,
        }
    }
}

pub fn write_report_csv<W: Write>(report: &ConsistencyReport, out: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    for cell in &report.cells {
        w.serialize(CsvCell::from(cell))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_jsonl<W: Write>(report: &ConsistencyReport, mut out: W) -> Result<(), CsvError> {
    for cell in &report.cells {
        serde_json::to_writer(&mut out, cell).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Human-readable per-model summary.
pub fn summary_text(report: &ConsistencyReport) -> String {
    let mut out = String::new();
    for m in &report.models {
        let better = report.verdicts_for(&m.mm).filter(|v| v.verdict == w5cat_core::metrics::Verdict::Better).count();
        let judged = report.verdicts_for(&m.mm).count();
        out.push_str(&format!(
            "{}: k={} questions={} mean_entropy={:.3} mean_normalized_entropy={:.3} none={}/{} ({:.3}) better_on={}/{}",
            m.mm,
            m.k,
            m.questions,
            m.mean_entropy,
            m.mean_normalized_entropy,
            m.nones,
            m.responses,
            m.none_proportion,
            better,
            judged
        ));
        if !m.none_modal_questions.is_empty() {
            out.push_str(&format!(" none_modal={}", m.none_modal_questions.join(",")));
        }
        out.push('\n');
    }
    out
}
