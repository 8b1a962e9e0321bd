//! Report rows and their CSV / JSON encodings.
//!
//! CSV: UTF-8, one header row, `.` decimal separator, shortest round-trip
//! decimal for `|x| ≥ 1e-3` and scientific notation below that. Missing
//! values are empty cells.

use std::io::Write;

use serde::Serialize;

use crate::config::{ExperimentConfig, Format};

/// Fixed-column record emitted by a subcommand.
pub trait Row: Serialize {
    const HEADER: &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributeRow {
    pub trials: u64,
    pub successes: u64,
    pub empirical: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub analytic: f64,
    pub fidelity_min: Option<f64>,
    pub fidelity_mean: Option<f64>,
    pub fidelity_max: Option<f64>,
    pub seed: u64,
}

impl Row for DistributeRow {
    const HEADER: &'static [&'static str] = &[
        "trials",
        "successes",
        "empirical",
        "std_err",
        "ci_low",
        "ci_high",
        "analytic",
        "fidelity_min",
        "fidelity_mean",
        "fidelity_max",
        "seed",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.trials.to_string(),
            self.successes.to_string(),
            fmt_num(self.empirical),
            fmt_num(self.std_err),
            fmt_num(self.ci_low),
            fmt_num(self.ci_high),
            fmt_num(self.analytic),
            fmt_opt(self.fidelity_min),
            fmt_opt(self.fidelity_mean),
            fmt_opt(self.fidelity_max),
            self.seed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeaterRow {
    pub trials: u64,
    pub segment_a_rate: f64,
    pub segment_a_std_err: f64,
    pub segment_b_rate: f64,
    pub segment_b_std_err: f64,
    pub bsm_attempts: u64,
    pub bsm_rate: f64,
    pub bsm_std_err: f64,
    pub end_to_end_rate: f64,
    pub end_to_end_std_err: f64,
    pub fidelity_min: Option<f64>,
    pub fidelity_mean: Option<f64>,
    pub p_pur_a: f64,
    pub p_pur_b: f64,
    pub swap_success_prob: f64,
    pub analytic_end_to_end: f64,
    pub seed: u64,
}

impl Row for RepeaterRow {
    const HEADER: &'static [&'static str] = &[
        "trials",
        "segment_a_rate",
        "segment_a_std_err",
        "segment_b_rate",
        "segment_b_std_err",
        "bsm_attempts",
        "bsm_rate",
        "bsm_std_err",
        "end_to_end_rate",
        "end_to_end_std_err",
        "fidelity_min",
        "fidelity_mean",
        "p_pur_a",
        "p_pur_b",
        "swap_success_prob",
        "analytic_end_to_end",
        "seed",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.trials.to_string(),
            fmt_num(self.segment_a_rate),
            fmt_num(self.segment_a_std_err),
            fmt_num(self.segment_b_rate),
            fmt_num(self.segment_b_std_err),
            self.bsm_attempts.to_string(),
            fmt_num(self.bsm_rate),
            fmt_num(self.bsm_std_err),
            fmt_num(self.end_to_end_rate),
            fmt_num(self.end_to_end_std_err),
            fmt_opt(self.fidelity_min),
            fmt_opt(self.fidelity_mean),
            fmt_num(self.p_pur_a),
            fmt_num(self.p_pur_b),
            fmt_num(self.swap_success_prob),
            fmt_num(self.analytic_end_to_end),
            self.seed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub eta: f64,
    pub p_pur_kwd: f64,
    pub p_pur: f64,
    pub ratio: f64,
    pub log10_ratio: f64,
}

impl Row for CompareRow {
    const HEADER: &'static [&'static str] = &["eta", "p_pur_kwd", "p_pur", "ratio", "log10_ratio"];

    fn cells(&self) -> Vec<String> {
        vec![
            fmt_num(self.eta),
            fmt_num(self.p_pur_kwd),
            fmt_num(self.p_pur),
            fmt_num(self.ratio),
            fmt_num(self.log10_ratio),
        ]
    }
}

/// One sweep point. Monte Carlo columns are empty for `compare-kwd` targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub target: String,
    pub trials: u64,
    pub empirical: Option<f64>,
    pub std_err: Option<f64>,
    pub analytic: f64,
    pub fidelity_min: Option<f64>,
    pub p_pur_kwd: f64,
    pub p_pur: f64,
    pub log10_ratio: f64,
}

impl Row for SweepRow {
    const HEADER: &'static [&'static str] = &[
        "param",
        "value",
        "target",
        "trials",
        "empirical",
        "std_err",
        "analytic",
        "fidelity_min",
        "p_pur_kwd",
        "p_pur",
        "log10_ratio",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.param.clone(),
            fmt_num(self.value),
            self.target.clone(),
            self.trials.to_string(),
            fmt_opt(self.empirical),
            fmt_opt(self.std_err),
            fmt_num(self.analytic),
            fmt_opt(self.fidelity_min),
            fmt_num(self.p_pur_kwd),
            fmt_num(self.p_pur),
            fmt_num(self.log10_ratio),
        ]
    }
}

pub fn write_csv<R: Row, W: Write>(rows: &[R], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::HEADER)?;
    for row in rows {
        w.write_record(row.cells())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct JsonReport<'a, S: Serialize, A: Serialize> {
    pub config: &'a ExperimentConfig,
    pub stats: S,
    pub analytic: A,
    pub timestamp: String,
    pub seed: u64,
}

/// RFC 3339 UTC time, or `SOURCE_DATE_EPOCH` when set so JSON output can be
/// made reproducible.
pub fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Encode `rows` (CSV) or the full report object (JSON).
pub fn render<R, S, A>(format: Format, rows: &[R], report: JsonReport<'_, S, A>) -> anyhow::Result<Vec<u8>>
where
    R: Row,
    S: Serialize,
    A: Serialize,
{
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(rows, &mut buf)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, &report)?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}
