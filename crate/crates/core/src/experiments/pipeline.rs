//! Train the three models on one split and extract every per-run metric.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::frustration::{global_frustration, semantic_fidelity_of_predictions, FrustrationReport};
use crate::geometry::{fisher_averaged, similarity, QuadraticForm};
use crate::models::{
    accuracy, bb_train, cbm_train, concept_mse, sae_train, BlackBoxModel, CbmModel, SaeModel,
    TrainConfig,
};
use crate::numerics::{mix_seed, Matrix};

const TAG_BB: u64 = 0x7069_7065_6262;
const TAG_SAE: u64 = 0x0070_6970_6573_6165;
const TAG_CBM: u64 = 0x0070_6970_6563_626d;

/// Hyperparameters of the three models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelHyper {
    pub hidden: usize,
    pub k_sae: usize,
    pub lambda_sae: f64,
    pub lambda_c: f64,
    pub batch_size: usize,
    pub bb_lr: f64,
    pub bb_epochs: usize,
    pub sae_lr: f64,
    pub sae_epochs: usize,
    pub cbm_lr: f64,
    pub cbm_epochs: usize,
}

impl Default for ModelHyper {
    fn default() -> Self {
        ModelHyper {
            hidden: 128,
            k_sae: 60,
            lambda_sae: 1e-3,
            lambda_c: 1.0,
            batch_size: 512,
            bb_lr: 1e-3,
            bb_epochs: 30,
            sae_lr: 2e-3,
            sae_epochs: 60,
            cbm_lr: 1e-3,
            cbm_epochs: 30,
        }
    }
}

impl ModelHyper {
    fn base(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            hidden: self.hidden,
            k_sae: self.k_sae,
            lambda_sae: self.lambda_sae,
            lambda_c: self.lambda_c,
            ..TrainConfig::default()
        }
    }

    pub fn bb_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.bb_lr,
            epochs: self.bb_epochs,
            seed: mix_seed(seed, TAG_BB),
            ..self.base()
        }
    }

    pub fn sae_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.sae_lr,
            epochs: self.sae_epochs,
            seed: mix_seed(seed, TAG_SAE),
            ..self.base()
        }
    }

    pub fn cbm_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.cbm_lr,
            epochs: self.cbm_epochs,
            seed: mix_seed(seed, TAG_CBM),
            ..self.base()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bb_config(0).validate()?;
        self.sae_config(0).validate()?;
        self.cbm_config(0).validate()?;
        if self.hidden == 0 || self.k_sae == 0 {
            return Err(crate::Error::InvalidArgument(
                "hidden and k_sae must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Named metric values of one run. Missing keys are written as empty cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics(BTreeMap<&'static str, f64>);

impl Metrics {
    pub fn set(&mut self, name: &'static str, value: f64) {
        self.0.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn extend(&mut self, other: &Metrics) {
        self.0.extend(other.0.iter().map(|(k, v)| (*k, *v)));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Clone, Debug)]
pub struct TrainedBackground {
    pub bb: BlackBoxModel,
    pub sae: SaeModel,
}

/// Trains the black box and the SAE, which depend only on activations and
/// labels.
pub fn train_background(
    train: &Dataset,
    hyper: &ModelHyper,
    seed: u64,
) -> Result<TrainedBackground> {
    let (bb, _) = bb_train(&train.activations, &train.labels, &hyper.bb_config(seed))?;
    let (sae, _) = sae_train(&train.activations, &hyper.sae_config(seed))?;
    Ok(TrainedBackground { bb, sae })
}

/// Trains a CBM on the dataset's `known` columns.
pub fn train_cbm(train: &Dataset, hyper: &ModelHyper, seed: u64) -> Result<CbmModel> {
    Ok(cbm_train(
        &train.activations,
        &train.known_concepts(),
        &train.labels,
        &hyper.cbm_config(seed),
    )?
    .0)
}

/// Fisher and Euclidean frustration reports of a CBM's concept map against
/// the SAE dictionary.
pub fn frustration_pair(
    q: &Matrix,
    d: &Matrix,
    fisher: &QuadraticForm,
) -> Result<(FrustrationReport, FrustrationReport)> {
    let f = global_frustration(&similarity(q, d, fisher)?)?;
    let e = global_frustration(&similarity(q, d, &QuadraticForm::euclidean(q.cols()))?)?;
    Ok((f, e))
}

/// Frustration metrics of `cbm` under `fisher` and the identity form.
pub fn frustration_metrics(
    cbm: &CbmModel,
    sae: &SaeModel,
    fisher: &QuadraticForm,
) -> Result<Metrics> {
    let (f, e) = frustration_pair(&cbm.q, &sae.d, fisher)?;
    let mut m = Metrics::default();
    m.set("gamma_fisher", f.gamma);
    m.set("gamma_euclid", e.gamma);
    m.set("frust12_fisher", f.frust(0, 1));
    m.set("frust12_euclid", e.frust(0, 1));
    m.set("n_averaged", fisher.n_averaged as f64);
    Ok(m)
}

/// Test-set accuracy, concept error and, given the true known-concept
/// covariance, semantic fidelity.
pub fn prediction_metrics(
    background: &TrainedBackground,
    cbm: &CbmModel,
    test: &Dataset,
    b_known: Option<&Matrix>,
) -> Result<Metrics> {
    let mut m = Metrics::default();
    m.set(
        "bb_acc",
        accuracy(
            &background.bb.predict_proba(&test.activations)?,
            &test.labels,
        ),
    );
    m.set(
        "cbm_acc",
        accuracy(&cbm.predict_proba(&test.activations)?, &test.labels),
    );
    let c_known = test.known_concepts();
    m.set(
        "concept_mse",
        concept_mse(cbm, &test.activations, &c_known)?,
    );
    if let Some(b) = b_known {
        m.set(
            "beta",
            semantic_fidelity_of_predictions(&cbm.predict_concepts_matrix(&test.activations)?, b)?,
        );
    }
    Ok(m)
}

/// Full single-split pipeline: train all three models on `train`, average
/// the Fisher form over training activations in `window`, evaluate on `test`.
pub fn run_split(
    train: &Dataset,
    test: &Dataset,
    hyper: &ModelHyper,
    window: (f64, f64),
    b_known: Option<&Matrix>,
    seed: u64,
) -> Result<Metrics> {
    let background = train_background(train, hyper, seed)?;
    let cbm = train_cbm(train, hyper, seed)?;
    let fisher = fisher_averaged(&background.bb, &train.activations, window.0, window.1)?;
    let mut m = prediction_metrics(&background, &cbm, test, b_known)?;
    m.extend(&frustration_metrics(&cbm, &background.sae, &fisher)?);
    Ok(m)
}
