//! Experiment suites: configuration, per-cell pipelines, paired tests and
//! the `runs.csv` / `tests.csv` / `summary.txt` / `timings.csv` outputs.

pub mod config;
pub mod pipeline;
pub mod records;
pub mod suites;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

pub use config::{ExperimentConfig, Preset};
pub use pipeline::{Metrics, ModelHyper};
pub use records::{RunRecord, TestRow};
pub use suites::{
    planted_triple_dataset, run_fisher_window, run_globe, run_realworld, run_synthetic,
    run_theory_check,
};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Globe,
    Synthetic,
    Realworld,
    FisherWindow,
    TheoryCheck,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Globe => "globe",
            Suite::Synthetic => "synthetic",
            Suite::Realworld => "realworld",
            Suite::FisherWindow => "fisher-window",
            Suite::TheoryCheck => "theory-check",
        }
    }
}

/// Everything a suite produces.
#[derive(Clone, Debug)]
pub struct SuiteOutput {
    pub suite: Suite,
    pub metric_columns: Vec<&'static str>,
    pub records: Vec<RunRecord>,
    pub tests: Vec<TestRow>,
    pub summary: String,
}

impl SuiteOutput {
    pub fn null_rows(&self) -> usize {
        self.records.iter().filter(|r| r.is_null()).count()
    }

    /// Tests for `metric` in the order they were run.
    pub fn tests_for<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a TestRow> + 'a {
        self.tests.iter().filter(move |t| t.metric == metric)
    }

    /// Writes the four output files into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        records::write_runs(
            BufWriter::new(File::create(dir.join("runs.csv"))?),
            &self.records,
            &self.metric_columns,
        )?;
        records::write_tests(
            BufWriter::new(File::create(dir.join("tests.csv"))?),
            &self.tests,
        )?;
        records::write_timings(
            BufWriter::new(File::create(dir.join("timings.csv"))?),
            &self.records,
        )?;
        std::fs::write(dir.join("summary.txt"), &self.summary)?;
        Ok(())
    }
}
