//! Run rows, paired-test rows and their CSV encodings.

use std::io::Write;

use super::pipeline::Metrics;
use crate::error::Result;
use crate::stats::{wilcoxon_signed_rank, PairedSample, TestResult};

/// One row of `runs.csv`: identifying keys, metrics and an error message for
/// failed cells. Wall time is kept apart so that `runs.csv` stays
/// reproducible byte for byte.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub keys: Vec<(&'static str, String)>,
    pub metrics: Metrics,
    pub error: Option<String>,
    pub wall_secs: f64,
}

impl RunRecord {
    pub fn key(&self, name: &str) -> Option<&str> {
        self.keys
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn is_null(&self) -> bool {
        self.error.is_some()
    }
}

/// Shortest round-trip decimal form; empty for missing values.
pub fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Writes `runs.csv`: the key columns of the first record, then
/// `metric_columns`, then `error`.
pub fn write_runs<W: Write>(out: W, records: &[RunRecord], metric_columns: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let key_names: Vec<&str> = records
        .first()
        .map(|r| r.keys.iter().map(|(k, _)| *k).collect())
        .unwrap_or_default();
    let mut header: Vec<&str> = key_names.clone();
    header.extend_from_slice(metric_columns);
    header.push("error");
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = r.keys.iter().map(|(_, v)| v.clone()).collect();
        row.extend(metric_columns.iter().map(|m| fmt_value(r.metrics.get(m))));
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `timings.csv`: key columns and wall seconds.
pub fn write_timings<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = records
        .first()
        .map(|r| r.keys.iter().map(|(k, _)| *k).collect())
        .unwrap_or_default();
    header.push("wall_secs");
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = r.keys.iter().map(|(_, v)| v.clone()).collect();
        row.push(format!("{:.3}", r.wall_secs));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One paired comparison, `group_a - group_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestRow {
    pub metric: String,
    pub group_a: String,
    pub group_b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n: usize,
    /// `None` when every difference is zero or there are no complete pairs.
    pub result: Option<TestResult>,
}

impl TestRow {
    pub fn p(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.p_two_sided)
    }

    pub fn hl(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.hl_estimate)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Signed-rank comparison of matched values; pairs with a missing side must
/// already be removed.
pub fn paired_test(metric: &str, group_a: &str, group_b: &str, a: &[f64], b: &[f64]) -> TestRow {
    assert_eq!(a.len(), b.len());
    let result = PairedSample::from_pairs(a, b)
        .ok()
        .and_then(|s| wilcoxon_signed_rank(&s).ok());
    TestRow {
        metric: metric.to_string(),
        group_a: group_a.to_string(),
        group_b: group_b.to_string(),
        mean_a: mean(a),
        mean_b: mean(b),
        n: a.len(),
        result,
    }
}

pub const TEST_COLUMNS: [&str; 12] = [
    "metric", "group_a", "group_b", "n", "W", "p", "hl", "ci_low", "ci_high", "method", "mean_a",
    "mean_b",
];

pub fn write_tests<W: Write>(out: W, tests: &[TestRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TEST_COLUMNS)?;
    for t in tests {
        let r = t.result.as_ref();
        w.write_record([
            t.metric.clone(),
            t.group_a.clone(),
            t.group_b.clone(),
            t.n.to_string(),
            fmt_value(r.map(|r| r.statistic)),
            fmt_value(r.map(|r| r.p_two_sided)),
            fmt_value(r.map(|r| r.hl_estimate)),
            fmt_value(r.map(|r| r.ci_low)),
            fmt_value(r.map(|r| r.ci_high)),
            r.map_or("none".to_string(), |r| r.method.to_string()),
            fmt_value(Some(t.mean_a).filter(|v| v.is_finite())),
            fmt_value(Some(t.mean_b).filter(|v| v.is_finite())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One summary line per test: means, HL shift with interval, p-value.
pub fn summary_line(t: &TestRow) -> String {
    match &t.result {
        Some(r) => format!(
            "{:<16} {} vs {}: mean {:.4} vs {:.4}, HL {:+.4e} [{:+.4e}, {:+.4e}], p = {:.4e} ({}, n = {})",
            t.metric, t.group_a, t.group_b, t.mean_a, t.mean_b, r.hl_estimate, r.ci_low, r.ci_high, r.p_two_sided, r.method, t.n
        ),
        None => format!("{:<16} {} vs {}: no test (n = {}, all differences zero or no pairs)", t.metric, t.group_a, t.group_b, t.n),
    }
}
