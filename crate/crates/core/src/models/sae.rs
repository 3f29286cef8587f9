use std::path::Path;

use super::io::{TensorReader, TensorWriter};
use super::{fit, init_normal, LossHistory, Params, TrainConfig};
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, Matrix, RngStream};

/// Sparse autoencoder `s(a) = ReLU(W a + b)`, `a_hat = D^T s(a)`.
///
/// The rows of `D` are the dictionary atoms in activation space. There is no
/// decoder bias and no norm constraint on the atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct SaeModel {
    /// Encoder, `k_sae x r`.
    pub w: Matrix,
    pub b: Vec<f64>,
    /// Decoder dictionary, `k_sae x r`.
    pub d: Matrix,
}

impl SaeModel {
    pub fn new(w: Matrix, b: Vec<f64>, d: Matrix) -> Result<Self> {
        if w.shape() != d.shape() || b.len() != w.rows() {
            return Err(Error::dims(format!(
                "encoder {:?}, bias {}, decoder {:?}",
                w.shape(),
                b.len(),
                d.shape()
            )));
        }
        Ok(SaeModel { w, b, d })
    }

    pub fn init(input_dim: usize, k_sae: usize, rng: &mut RngStream) -> Self {
        let w = Matrix::from_vec(
            k_sae,
            input_dim,
            init_normal(rng, k_sae * input_dim, input_dim),
        )
        .expect("shape");
        let d = Matrix::from_vec(k_sae, input_dim, init_normal(rng, k_sae * input_dim, k_sae))
            .expect("shape");
        SaeModel {
            w,
            b: vec![0.0; k_sae],
            d,
        }
    }

    pub fn k_sae(&self) -> usize {
        self.w.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn dictionary(&self) -> &Matrix {
        &self.d
    }

    pub fn encode(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.input_dim() {
            return Err(Error::dims(format!(
                "activation has {} entries, SAE expects {}",
                a.len(),
                self.input_dim()
            )));
        }
        Ok(self.encode_unchecked(a))
    }

    fn encode_unchecked(&self, a: &[f64]) -> Vec<f64> {
        self.w
            .row_iter()
            .zip(&self.b)
            .map(|(row, &b)| (dot(row, a) + b).max(0.0))
            .collect()
    }

    pub fn decode(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.d.tr_matvec(s)
    }

    fn sample_loss(&self, a: &[f64], lambda: f64) -> f64 {
        let s = self.encode_unchecked(a);
        let mut recon = vec![0.0; a.len()];
        for (atom, &sk) in self.d.row_iter().zip(&s) {
            if sk > 0.0 {
                axpy(sk, atom, &mut recon);
            }
        }
        let err: f64 = recon.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
        err + lambda * s.iter().sum::<f64>()
    }

    /// Mean of `||a - a_hat||^2 + lambda ||s||_1` over the rows in `idx`.
    pub fn loss(&self, a: &Matrix, lambda: f64, idx: &[usize]) -> f64 {
        idx.iter()
            .map(|&i| self.sample_loss(a.row(i), lambda))
            .sum::<f64>()
            / idx.len() as f64
    }

    /// Mean squared reconstruction error `||a - a_hat||^2` over all rows.
    pub fn reconstruction_mse(&self, a: &Matrix) -> f64 {
        a.row_iter().map(|x| self.sample_loss(x, 0.0)).sum::<f64>() / a.rows() as f64
    }

    /// Mean `||s(a)||_1` over all rows.
    pub fn mean_l1(&self, a: &Matrix) -> f64 {
        a.row_iter()
            .map(|x| self.encode_unchecked(x).iter().sum::<f64>())
            .sum::<f64>()
            / a.rows() as f64
    }

    pub fn loss_and_grad(&self, a: &Matrix, lambda: f64, idx: &[usize]) -> (f64, SaeModel) {
        let r = self.input_dim();
        let mut grad = self.zeros_like();
        let inv_n = 1.0 / idx.len() as f64;
        let mut err = vec![0.0; r];
        let mut loss = 0.0;
        for &i in idx {
            let x = a.row(i);
            let s = self.encode_unchecked(x);
            err.iter_mut().zip(x).for_each(|(e, &xi)| *e = -xi);
            for (atom, &sk) in self.d.row_iter().zip(&s) {
                if sk > 0.0 {
                    axpy(sk, atom, &mut err);
                }
            }
            loss += dot(&err, &err) + lambda * s.iter().sum::<f64>();
            for (k, &sk) in s.iter().enumerate() {
                if sk > 0.0 {
                    axpy(2.0 * sk * inv_n, &err, grad.d.row_mut(k));
                    let dpre = (2.0 * dot(self.d.row(k), &err) + lambda) * inv_n;
                    grad.b[k] += dpre;
                    axpy(dpre, x, grad.w.row_mut(k));
                }
            }
        }
        (loss * inv_n, grad)
    }

    pub fn to_text(&self) -> String {
        let mut w = TensorWriter::new("sae");
        w.matrix("w", &self.w);
        w.vector("b", &self.b);
        w.matrix("d", &self.d);
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TensorReader::parse(text, "sae")?;
        let w = r.matrix("w")?;
        let b = r.vector("b")?;
        let d = r.matrix("d")?;
        SaeModel::new(w, b, d)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        SaeModel::from_text(&std::fs::read_to_string(path)?)
    }
}

impl Params for SaeModel {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice(), &self.b, self.d.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), &mut self.b, self.d.as_mut_slice()]
    }

    fn zeros_like(&self) -> Self {
        SaeModel {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: vec![0.0; self.b.len()],
            d: Matrix::zeros(self.d.rows(), self.d.cols()),
        }
    }
}

/// Trains an SAE with `cfg.k_sae` latents and sparsity weight `cfg.lambda_sae`.
pub fn sae_train(a: &Matrix, cfg: &TrainConfig) -> Result<(SaeModel, LossHistory)> {
    cfg.validate()?;
    if cfg.k_sae == 0 {
        return Err(Error::InvalidArgument("k_sae must be at least 1".into()));
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut model = SaeModel::init(a.cols(), cfg.k_sae, &mut rng);
    let all: Vec<usize> = (0..a.rows()).collect();
    let lambda = cfg.lambda_sae;
    let history = fit(
        &mut model,
        a.rows(),
        cfg,
        &mut rng,
        |m, idx| m.loss_and_grad(a, lambda, idx),
        |m| m.loss(a, lambda, &all),
    )?;
    Ok((model, history))
}
