use std::path::Path;

use super::io::{TensorReader, TensorWriter};
use super::{bce_with_logit, fit, init_normal, sigmoid, LossHistory, Params, TrainConfig};
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, Matrix, RngStream};

/// `l(a) = w_l . ReLU(W_H a + b_H) + b_l`, `p(a) = sigmoid(l(a))`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlackBoxModel {
    /// `h x r`.
    pub w_h: Matrix,
    pub b_h: Vec<f64>,
    pub w_l: Vec<f64>,
    pub b_l: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BbOutput {
    pub logit: f64,
    pub prob: f64,
    /// Hidden units with strictly positive pre-activation.
    pub mask: Vec<bool>,
}

impl BlackBoxModel {
    pub fn new(w_h: Matrix, b_h: Vec<f64>, w_l: Vec<f64>, b_l: f64) -> Result<Self> {
        let h = w_h.rows();
        if b_h.len() != h || w_l.len() != h {
            return Err(Error::dims(format!(
                "hidden width {h} but b_H has {} and w_l has {} entries",
                b_h.len(),
                w_l.len()
            )));
        }
        Ok(BlackBoxModel { w_h, b_h, w_l, b_l })
    }

    pub fn init(input_dim: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let w_h = Matrix::from_vec(
            hidden,
            input_dim,
            init_normal(rng, hidden * input_dim, input_dim),
        )
        .expect("shape");
        let w_l = init_normal(rng, hidden, hidden);
        BlackBoxModel {
            w_h,
            b_h: vec![0.0; hidden],
            w_l,
            b_l: 0.0,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_h.cols()
    }

    fn check_input(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.input_dim() {
            return Err(Error::dims(format!(
                "activation has {} entries, model expects {}",
                a.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, a: &[f64]) -> Result<BbOutput> {
        self.check_input(a)?;
        let mut mask = Vec::with_capacity(self.hidden());
        let mut logit = self.b_l;
        for ((row, &b), &w) in self.w_h.row_iter().zip(&self.b_h).zip(&self.w_l) {
            let pre = dot(row, a) + b;
            let active = pre > 0.0;
            if active {
                logit += w * pre;
            }
            mask.push(active);
        }
        Ok(BbOutput {
            logit,
            prob: sigmoid(logit),
            mask,
        })
    }

    fn logit_unchecked(&self, a: &[f64]) -> f64 {
        let mut logit = self.b_l;
        for ((row, &b), &w) in self.w_h.row_iter().zip(&self.b_h).zip(&self.w_l) {
            let pre = dot(row, a) + b;
            if pre > 0.0 {
                logit += w * pre;
            }
        }
        logit
    }

    /// `p(y = 1 | a)` for every row of `a`.
    pub fn predict_proba(&self, a: &Matrix) -> Result<Vec<f64>> {
        if a.cols() != self.input_dim() {
            return Err(Error::dims(format!(
                "activations have {} columns, model expects {}",
                a.cols(),
                self.input_dim()
            )));
        }
        Ok(a.row_iter()
            .map(|x| sigmoid(self.logit_unchecked(x)))
            .collect())
    }

    /// Gradient of the logit with respect to the input: `W_H^T (mask * w_l)`.
    pub fn input_gradient(&self, a: &[f64]) -> Result<(BbOutput, Vec<f64>)> {
        let out = self.forward(a)?;
        let mut g = vec![0.0; self.input_dim()];
        for ((row, &active), &w) in self.w_h.row_iter().zip(&out.mask).zip(&self.w_l) {
            if active {
                axpy(w, row, &mut g);
            }
        }
        Ok((out, g))
    }

    /// Mean binary cross-entropy over the rows in `idx`.
    pub fn loss(&self, a: &Matrix, y: &[u8], idx: &[usize]) -> f64 {
        idx.iter()
            .map(|&i| bce_with_logit(self.logit_unchecked(a.row(i)), y[i]))
            .sum::<f64>()
            / idx.len() as f64
    }

    /// Mean BCE over `idx` and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, a: &Matrix, y: &[u8], idx: &[usize]) -> (f64, BlackBoxModel) {
        let h = self.hidden();
        let mut grad = self.zeros_like();
        let inv_n = 1.0 / idx.len() as f64;
        let mut hidden = vec![0.0; h];
        let mut loss = 0.0;
        for &i in idx {
            let x = a.row(i);
            let mut logit = self.b_l;
            for (k, (row, &b)) in self.w_h.row_iter().zip(&self.b_h).enumerate() {
                let pre = dot(row, x) + b;
                hidden[k] = if pre > 0.0 { pre } else { 0.0 };
                logit += self.w_l[k] * hidden[k];
            }
            loss += bce_with_logit(logit, y[i]);
            let dlogit = (sigmoid(logit) - y[i] as f64) * inv_n;
            grad.b_l += dlogit;
            for (k, &hk) in hidden.iter().enumerate() {
                if hk > 0.0 {
                    grad.w_l[k] += dlogit * hk;
                    let dpre = dlogit * self.w_l[k];
                    grad.b_h[k] += dpre;
                    axpy(dpre, x, grad.w_h.row_mut(k));
                }
            }
        }
        (loss * inv_n, grad)
    }

    pub fn to_text(&self) -> String {
        let mut w = TensorWriter::new("blackbox");
        w.matrix("w_h", &self.w_h);
        w.vector("b_h", &self.b_h);
        w.vector("w_l", &self.w_l);
        w.vector("b_l", &[self.b_l]);
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TensorReader::parse(text, "blackbox")?;
        let w_h = r.matrix("w_h")?;
        let b_h = r.vector("b_h")?;
        let w_l = r.vector("w_l")?;
        let b_l = r.scalar("b_l")?;
        BlackBoxModel::new(w_h, b_h, w_l, b_l)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        BlackBoxModel::from_text(&std::fs::read_to_string(path)?)
    }
}

impl Params for BlackBoxModel {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_h.as_slice(),
            &self.b_h,
            &self.w_l,
            std::slice::from_ref(&self.b_l),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_h.as_mut_slice(),
            &mut self.b_h,
            &mut self.w_l,
            std::slice::from_mut(&mut self.b_l),
        ]
    }

    fn zeros_like(&self) -> Self {
        BlackBoxModel {
            w_h: Matrix::zeros(self.w_h.rows(), self.w_h.cols()),
            b_h: vec![0.0; self.b_h.len()],
            w_l: vec![0.0; self.w_l.len()],
            b_l: 0.0,
        }
    }
}

/// Trains the black box on `(a, y)` by minimising mean binary cross-entropy.
pub fn bb_train(a: &Matrix, y: &[u8], cfg: &TrainConfig) -> Result<(BlackBoxModel, LossHistory)> {
    cfg.validate()?;
    if a.rows() != y.len() {
        return Err(Error::dims(format!(
            "{} activation rows but {} labels",
            a.rows(),
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    if cfg.hidden == 0 {
        return Err(Error::InvalidArgument(
            "hidden width must be at least 1".into(),
        ));
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut model = BlackBoxModel::init(a.cols(), cfg.hidden, &mut rng);
    let all: Vec<usize> = (0..a.rows()).collect();
    let history = fit(
        &mut model,
        a.rows(),
        cfg,
        &mut rng,
        |m, idx| m.loss_and_grad(a, y, idx),
        |m| m.loss(a, y, &all),
    )?;
    Ok((model, history))
}
