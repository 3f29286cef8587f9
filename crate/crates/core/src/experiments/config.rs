//! Experiment configuration: presets, TOML files and `section.key=value`
//! overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pipeline::ModelHyper;
use crate::error::{Error, Result};
use crate::geometry::{DEFAULT_WINDOW, WINDOW_SWEEP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobeSuite {
    pub reps: usize,
    pub n: usize,
    pub r: usize,
    pub sigma_a: f64,
    pub radius: f64,
    pub train_fraction: f64,
}

impl Default for GlobeSuite {
    fn default() -> Self {
        GlobeSuite {
            reps: 50,
            n: 8000,
            r: 64,
            sigma_a: 0.3,
            radius: 0.75,
            train_fraction: 0.75,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSuite {
    pub seeds: usize,
    pub n: usize,
    pub k: usize,
    pub k_known: Vec<usize>,
    pub alpha: Vec<f64>,
    pub omega: Vec<f64>,
    pub r: usize,
    pub sigma_a: f64,
    pub sigma_y: f64,
    pub train_fraction: f64,
    /// Monte Carlo draws per regime for the Bayes-classifier check.
    pub n_mc: usize,
}

impl Default for SyntheticSuite {
    fn default() -> Self {
        SyntheticSuite {
            seeds: 10,
            n: 8000,
            k: 50,
            k_known: vec![10, 20, 30, 40],
            alpha: vec![-1.0, 0.0, 1.0],
            omega: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            r: 64,
            sigma_a: 0.3,
            sigma_y: 1.5,
            train_fraction: 0.75,
            n_mc: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealworldSuite {
    pub folds: usize,
    /// Embedding file; without one the planted-triple stand-in is generated.
    pub input: Option<PathBuf>,
    pub k_sae: usize,
    pub bb_epochs: usize,
    /// Stand-in size, correlation of the two supervised concepts, task
    /// weight on the planted third concept and label noise.
    pub standin_n: usize,
    pub standin_r: usize,
    pub standin_coupling: f64,
    pub standin_omega: f64,
    pub standin_sigma_y: f64,
}

impl Default for RealworldSuite {
    fn default() -> Self {
        RealworldSuite {
            folds: 10,
            input: None,
            k_sae: 300,
            bb_epochs: 60,
            standin_n: 2000,
            standin_r: 64,
            standin_coupling: 0.6,
            standin_omega: 0.6,
            standin_sigma_y: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FisherWindowSuite {
    pub reps: usize,
    pub windows: Vec<(f64, f64)>,
}

impl Default for FisherWindowSuite {
    fn default() -> Self {
        FisherWindowSuite {
            reps: 50,
            windows: WINDOW_SWEEP.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySuite {
    pub instances: usize,
    pub n_mc: usize,
    pub k: usize,
    pub sigma_y: f64,
}

impl Default for TheorySuite {
    fn default() -> Self {
        TheorySuite {
            instances: 50,
            n_mc: 1_000_000,
            k: 12,
            sigma_y: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
    pub p_low: f64,
    pub p_high: f64,
    pub models: ModelHyper,
    pub globe: GlobeSuite,
    pub synthetic: SyntheticSuite,
    pub realworld: RealworldSuite,
    pub fisher_window: FisherWindowSuite,
    pub theory: TheorySuite,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            workers: 0,
            p_low: DEFAULT_WINDOW.0,
            p_high: DEFAULT_WINDOW.1,
            models: ModelHyper::default(),
            globe: GlobeSuite::default(),
            synthetic: SyntheticSuite::default(),
            realworld: RealworldSuite::default(),
            fisher_window: FisherWindowSuite::default(),
            theory: TheorySuite::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Full published protocol.
    Paper,
    /// Five repetitions and a twelve-regime synthetic grid.
    Quick,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Preset::Paper),
            "quick" => Ok(Preset::Quick),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected `paper` or `quick`)"
            ))),
        }
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut cfg = ExperimentConfig::default();
        if preset == Preset::Quick {
            cfg.globe.reps = 5;
            cfg.fisher_window.reps = 5;
            cfg.synthetic.seeds = 5;
            cfg.synthetic.k_known = vec![10, 30];
            cfg.synthetic.omega = vec![0.5, 1.0];
            cfg.theory.instances = 10;
            cfg.theory.n_mc = 100_000;
        }
        cfg
    }

    pub fn window(&self) -> (f64, f64) {
        (self.p_low, self.p_high)
    }

    /// Builds a configuration from a preset, an optional TOML file and a list
    /// of `section.key=value` overrides, applied in that order. Override
    /// values are parsed as TOML and fall back to plain strings.
    pub fn load(preset: Preset, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = Self::preset(preset).to_table();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let user: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
            merge(&mut table, user);
        }
        Self::from_table(table, overrides)
    }

    /// A copy with `section.key=value` overrides applied.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        Self::from_table(self.to_table(), overrides)
    }

    fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("configuration serialises")
    }

    fn from_table(mut table: toml::Table, overrides: &[String]) -> Result<Self> {
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0 <= self.p_low && self.p_low < self.p_high && self.p_high <= 1.0) {
            return bad(format!(
                "window ({}, {}) needs 0 <= p_low < p_high <= 1",
                self.p_low, self.p_high
            ));
        }
        self.models
            .validate()
            .map_err(|e| Error::Config(format!("models: {e}")))?;
        let g = &self.globe;
        if g.n < 8 || g.r == 0 || !(g.radius > 0.0) || !(g.sigma_a >= 0.0) {
            return bad("globe: need n >= 8, r >= 1, radius > 0, sigma_a >= 0".into());
        }
        let s = &self.synthetic;
        if s.k_known.iter().any(|&kk| kk < 2 || kk >= s.k) {
            return bad(format!(
                "synthetic: every k_known must satisfy 2 <= k_known < k = {}",
                s.k
            ));
        }
        if s.alpha.iter().any(|a| !(-1.0..=1.0).contains(a))
            || s.omega.iter().any(|w| !(0.0..=1.0).contains(w))
        {
            return bad("synthetic: alpha must lie in [-1, 1] and omega in [0, 1]".into());
        }
        if s.n < 8 || s.n_mc == 0 || !(s.sigma_y >= 0.0) || !(s.sigma_a >= 0.0) {
            return bad("synthetic: need n >= 8, n_mc >= 1 and non-negative noise levels".into());
        }
        for (name, f) in [("globe", g.train_fraction), ("synthetic", s.train_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("{name}: train_fraction must lie in (0, 1)"));
            }
        }
        if self.realworld.folds < 2 || self.realworld.k_sae == 0 || self.realworld.bb_epochs == 0 {
            return bad("realworld: need folds >= 2, k_sae >= 1, bb_epochs >= 1".into());
        }
        if self
            .fisher_window
            .windows
            .iter()
            .any(|&(lo, hi)| !(0.0 <= lo && lo < hi && hi <= 1.0))
        {
            return bad("fisher_window: every window needs 0 <= p_low < p_high <= 1".into());
        }
        if self.theory.k < 3 || self.theory.n_mc == 0 {
            return bad("theory: need k >= 3 and n_mc >= 1".into());
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Config(format!("empty override key `{key}`")))?;
    let mut cur = table;
    for p in parts {
        cur = match cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("`{p}` in `{key}` is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(
            (c.models.hidden, c.models.k_sae, c.models.batch_size),
            (128, 60, 512)
        );
        assert_eq!(
            (c.models.bb_epochs, c.models.sae_epochs, c.models.cbm_epochs),
            (30, 60, 30)
        );
        assert_eq!(
            (c.models.sae_lr, c.models.lambda_sae, c.models.lambda_c),
            (2e-3, 1e-3, 1.0)
        );
        assert_eq!((c.p_low, c.p_high), (0.2, 0.8));
        assert_eq!(c.realworld.k_sae, 300);
        let s = &c.synthetic;
        assert_eq!(s.k_known.len() * s.alpha.len() * s.omega.len(), 60);
    }

    #[test]
    fn quick_preset_has_twelve_regimes() {
        let c = ExperimentConfig::preset(Preset::Quick);
        let s = &c.synthetic;
        assert_eq!(s.k_known.len() * s.alpha.len() * s.omega.len(), 12);
        assert_eq!(c.globe.reps, 5);
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(
            &path,
            "seed = 7\n[globe]\nreps = 3\n[models]\nhidden = 16\n",
        )
        .unwrap();
        let c = ExperimentConfig::load(
            Preset::Paper,
            Some(&path),
            &["globe.reps=4".into(), "synthetic.omega=[0.5]".into()],
        )
        .unwrap();
        assert_eq!((c.seed, c.globe.reps, c.models.hidden), (7, 4, 16));
        assert_eq!(c.synthetic.omega, vec![0.5]);
        assert_eq!(c.models.k_sae, 60);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::preset(Preset::Quick);
        let back: ExperimentConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(Preset::parse("full"), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::load(Preset::Paper, None, &["p_low=0.9".into()]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::load(Preset::Paper, None, &["globe.nope=1".into()]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::load(Preset::Paper, None, &["noequals".into()]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::load(Preset::Paper, None, &["synthetic.k_known=[50]".into()]),
            Err(Error::Config(_))
        ));
    }
}
