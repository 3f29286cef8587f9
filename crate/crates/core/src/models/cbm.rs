use std::path::Path;

use super::io::{TensorReader, TensorWriter};
use super::{bce_with_logit, fit, init_normal, sigmoid, LossHistory, Params, TrainConfig};
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, Matrix, RngStream};

/// Linear concept bottleneck: `c_hat = Q a`, `p = sigmoid(w . c_hat + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CbmModel {
    /// Concept map, `k_known x r`.
    pub q: Matrix,
    pub w: Vec<f64>,
    pub b: f64,
}

impl CbmModel {
    pub fn new(q: Matrix, w: Vec<f64>, b: f64) -> Result<Self> {
        if w.len() != q.rows() {
            return Err(Error::dims(format!(
                "Q has {} rows but w has {} entries",
                q.rows(),
                w.len()
            )));
        }
        Ok(CbmModel { q, w, b })
    }

    pub fn init(input_dim: usize, k_known: usize, rng: &mut RngStream) -> Self {
        let q = Matrix::from_vec(
            k_known,
            input_dim,
            init_normal(rng, k_known * input_dim, input_dim),
        )
        .expect("shape");
        // The head is a logistic regression on c_hat; starting it at zero lets
        // its sign follow the data instead of the draw.
        CbmModel {
            q,
            w: vec![0.0; k_known],
            b: 0.0,
        }
    }

    pub fn k_known(&self) -> usize {
        self.q.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.q.cols()
    }

    pub fn predict_concepts(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.q.matvec(a)
    }

    /// Predicted concepts for every row, `n x k_known`.
    pub fn predict_concepts_matrix(&self, a: &Matrix) -> Result<Matrix> {
        a.matmul_transposed(&self.q)
    }

    pub fn logit(&self, a: &[f64]) -> Result<f64> {
        Ok(dot(&self.w, &self.q.matvec(a)?) + self.b)
    }

    pub fn prob(&self, a: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(a)?))
    }

    pub fn predict_proba(&self, a: &Matrix) -> Result<Vec<f64>> {
        let c = self.predict_concepts_matrix(a)?;
        Ok(c.row_iter()
            .map(|ci| sigmoid(dot(&self.w, ci) + self.b))
            .collect())
    }

    fn sample_terms(&self, x: &[f64], c: &[f64], chat: &mut [f64]) -> (f64, f64) {
        for (k, row) in self.q.row_iter().enumerate() {
            chat[k] = dot(row, x);
        }
        let logit = dot(&self.w, chat) + self.b;
        let sq: f64 = chat.iter().zip(c).map(|(p, t)| (p - t) * (p - t)).sum();
        (logit, sq)
    }

    /// Joint loss `BCE + lambda_c * ||c - Q a||^2`, averaged over `idx`.
    pub fn loss(&self, a: &Matrix, c: &Matrix, y: &[u8], lambda_c: f64, idx: &[usize]) -> f64 {
        let mut chat = vec![0.0; self.k_known()];
        let total: f64 = idx
            .iter()
            .map(|&i| {
                let (logit, sq) = self.sample_terms(a.row(i), c.row(i), &mut chat);
                bce_with_logit(logit, y[i]) + lambda_c * sq
            })
            .sum();
        total / idx.len() as f64
    }

    pub fn task_loss(&self, a: &Matrix, y: &[u8]) -> Result<f64> {
        let p = self.predict_concepts_matrix(a)?;
        Ok(p.row_iter()
            .zip(y)
            .map(|(ci, &yi)| bce_with_logit(dot(&self.w, ci) + self.b, yi))
            .sum::<f64>()
            / y.len() as f64)
    }

    pub fn loss_and_grad(
        &self,
        a: &Matrix,
        c: &Matrix,
        y: &[u8],
        lambda_c: f64,
        idx: &[usize],
    ) -> (f64, CbmModel) {
        let k = self.k_known();
        let mut grad = self.zeros_like();
        let inv_n = 1.0 / idx.len() as f64;
        let mut chat = vec![0.0; k];
        let mut loss = 0.0;
        for &i in idx {
            let (x, ci) = (a.row(i), c.row(i));
            let (logit, sq) = self.sample_terms(x, ci, &mut chat);
            loss += bce_with_logit(logit, y[i]) + lambda_c * sq;
            let dlogit = (sigmoid(logit) - y[i] as f64) * inv_n;
            grad.b += dlogit;
            for j in 0..k {
                grad.w[j] += dlogit * chat[j];
                let dchat = dlogit * self.w[j] + 2.0 * lambda_c * (chat[j] - ci[j]) * inv_n;
                axpy(dchat, x, grad.q.row_mut(j));
            }
        }
        (loss * inv_n, grad)
    }

    pub fn to_text(&self) -> String {
        let mut w = TensorWriter::new("cbm");
        w.matrix("q", &self.q);
        w.vector("w", &self.w);
        w.vector("b", &[self.b]);
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TensorReader::parse(text, "cbm")?;
        let q = r.matrix("q")?;
        let w = r.vector("w")?;
        let b = r.scalar("b")?;
        CbmModel::new(q, w, b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        CbmModel::from_text(&std::fs::read_to_string(path)?)
    }
}

impl Params for CbmModel {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.q.as_slice(), &self.w, std::slice::from_ref(&self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.q.as_mut_slice(),
            &mut self.w,
            std::slice::from_mut(&mut self.b),
        ]
    }

    fn zeros_like(&self) -> Self {
        CbmModel {
            q: Matrix::zeros(self.q.rows(), self.q.cols()),
            w: vec![0.0; self.w.len()],
            b: 0.0,
        }
    }
}

/// Joint training of concept map and task head on `(a, c_known, y)`.
pub fn cbm_train(
    a: &Matrix,
    c_known: &Matrix,
    y: &[u8],
    cfg: &TrainConfig,
) -> Result<(CbmModel, LossHistory)> {
    cfg.validate()?;
    if a.rows() != c_known.rows() || a.rows() != y.len() {
        return Err(Error::dims(format!(
            "{} activation rows, {} concept rows, {} labels",
            a.rows(),
            c_known.rows(),
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut model = CbmModel::init(a.cols(), c_known.cols(), &mut rng);
    let all: Vec<usize> = (0..a.rows()).collect();
    let lambda = cfg.lambda_c;
    let history = fit(
        &mut model,
        a.rows(),
        cfg,
        &mut rng,
        |m, idx| m.loss_and_grad(a, c_known, y, lambda, idx),
        |m| m.loss(a, c_known, y, lambda, &all),
    )?;
    Ok((model, history))
}

/// Mean over rows of `||c - Q a||^2`.
pub fn concept_mse(model: &CbmModel, a: &Matrix, c_known: &Matrix) -> Result<f64> {
    if c_known.cols() != model.k_known() || c_known.rows() != a.rows() {
        return Err(Error::dims(format!(
            "concepts {:?} do not match model with {} concepts on {} rows",
            c_known.shape(),
            model.k_known(),
            a.rows()
        )));
    }
    let pred = model.predict_concepts_matrix(a)?;
    let total: f64 = pred
        .as_slice()
        .iter()
        .zip(c_known.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(total / a.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{adam_step, AdamState};

    fn linear_problem(n: usize, r: usize, k: usize, seed: u64) -> (Matrix, Matrix, Vec<u8>) {
        let mut rng = RngStream::new(seed);
        let a = rng.normal_matrix(n, r, 1.0);
        let w_true = rng.normal_matrix(k, r, 1.0 / (r as f64).sqrt());
        let c = a.matmul_transposed(&w_true).unwrap();
        let v: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
        let y = c.row_iter().map(|ci| (dot(ci, &v) > 0.0) as u8).collect();
        (a, c, y)
    }

    fn mean_column_variance(c: &Matrix) -> f64 {
        let mu = c.column_means();
        let n = c.rows() as f64;
        c.row_iter()
            .map(|x| {
                x.iter()
                    .zip(&mu)
                    .map(|(v, m)| (v - m) * (v - m))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / (n * c.cols() as f64)
    }

    #[test]
    fn recovers_linear_concepts() {
        let (a, c, y) = linear_problem(1200, 8, 3, 2);
        let (train_a, test_a) = (
            a.select_rows(&(0..900).collect::<Vec<_>>()),
            a.select_rows(&(900..1200).collect::<Vec<_>>()),
        );
        let (train_c, test_c) = (
            c.select_rows(&(0..900).collect::<Vec<_>>()),
            c.select_rows(&(900..1200).collect::<Vec<_>>()),
        );
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 64,
            epochs: 40,
            seed: 1,
            ..Default::default()
        };
        let (m, hist) = cbm_train(&train_a, &train_c, &y[..900], &cfg).unwrap();
        assert!(hist.final_loss() < hist.initial);
        let mse = concept_mse(&m, &test_a, &test_c).unwrap() / 3.0;
        assert!(
            mse <= 0.1 * mean_column_variance(&test_c),
            "per-concept mse {mse}"
        );
    }

    #[test]
    fn no_concept_loss_matches_logistic_regression() {
        // noisy labels keep the logistic optimum finite
        let (a, c, _) = linear_problem(500, 6, 3, 9);
        let mut rng = RngStream::new(10);
        let v: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let y: Vec<u8> = c
            .row_iter()
            .map(|ci| (rng.uniform() < sigmoid(dot(ci, &v))) as u8)
            .collect();
        let cfg = TrainConfig {
            lambda_c: 0.0,
            learning_rate: 1e-2,
            batch_size: 50,
            epochs: 60,
            seed: 2,
            ..Default::default()
        };
        let (m, _) = cbm_train(&a, &c, &y, &cfg).unwrap();
        let cbm_loss = m.task_loss(&a, &y).unwrap();

        // direct logistic regression on activations with the same optimiser
        let mut w = vec![0.0; 6];
        let mut b = [0.0];
        let mut state = AdamState::new(&[6, 1]);
        let adam = cfg.adam();
        for _ in 0..3000 {
            let mut gw = vec![0.0; 6];
            let mut gb = [0.0];
            for (x, &yi) in a.row_iter().zip(&y) {
                let d = (sigmoid(dot(&w, x) + b[0]) - yi as f64) / 500.0;
                axpy(d, x, &mut gw);
                gb[0] += d;
            }
            adam_step(&mut [&mut w, &mut b], &[&gw, &gb], &mut state, &adam);
        }
        let direct: f64 = a
            .row_iter()
            .zip(&y)
            .map(|(x, &yi)| bce_with_logit(dot(&w, x) + b[0], yi))
            .sum::<f64>()
            / 500.0;
        assert!(
            (cbm_loss - direct).abs() <= 0.05 * direct.max(0.05),
            "cbm {cbm_loss} direct {direct}"
        );
    }

    fn random_model(r: usize, k: usize, rng: &mut RngStream) -> CbmModel {
        let q = rng.normal_matrix(k, r, 1.0);
        let w = (0..k).map(|_| rng.normal()).collect();
        CbmModel::new(q, w, rng.normal()).unwrap()
    }

    #[test]
    fn init_starts_head_at_zero() {
        let m = CbmModel::init(4, 3, &mut RngStream::new(2));
        assert_eq!((m.w.as_slice(), m.b), (&[0.0; 3][..], 0.0));
        assert!(m.q.max_abs() > 0.0);
    }

    #[test]
    fn forward_matches_definition() {
        let mut rng = RngStream::new(5);
        let m = random_model(4, 3, &mut rng);
        let a: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let mut logit = m.b;
        for j in 0..3 {
            let cj: f64 = (0..4).map(|t| m.q[(j, t)] * a[t]).sum();
            logit += m.w[j] * cj;
        }
        let expect = 1.0 / (1.0 + (-logit).exp());
        assert!((m.prob(&a).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn reparameterisation_invariance() {
        let mut rng = RngStream::new(6);
        let m = random_model(4, 2, &mut rng);
        // T = [[2, 1], [0, 1]], T^{-T} = [[0.5, 0], [-0.5, 1]]
        let t = Matrix::from_rows(&[[2.0, 1.0], [0.0, 1.0]]);
        let t_inv_t = Matrix::from_rows(&[[0.5, 0.0], [-0.5, 1.0]]);
        let m2 =
            CbmModel::new(t.matmul(&m.q).unwrap(), t_inv_t.matvec(&m.w).unwrap(), m.b).unwrap();
        for _ in 0..10 {
            let a: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            assert!((m.prob(&a).unwrap() - m2.prob(&a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn concept_mse_reference_values() {
        let q = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        let m = CbmModel::new(q, vec![1.0, 1.0], 0.0).unwrap();
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]);
        assert_eq!(concept_mse(&m, &a, &a).unwrap(), 0.0);

        let zero = CbmModel::new(Matrix::zeros(2, 2), vec![0.0; 2], 0.0).unwrap();
        let mut rng = RngStream::new(1);
        let c = rng.normal_matrix(20000, 2, 1.0);
        let mse = concept_mse(&zero, &Matrix::zeros(20000, 2), &c).unwrap();
        assert!((mse - 2.0).abs() < 0.1, "{mse}");

        assert!(matches!(
            concept_mse(&m, &a, &Matrix::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = RngStream::new(4);
        let m = random_model(5, 2, &mut rng);
        assert_eq!(CbmModel::from_text(&m.to_text()).unwrap(), m);
    }
}
