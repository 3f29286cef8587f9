//! Task-aligned geometry on activation space.
//!
//! For the one-hidden-layer black box the Fisher metric at `a` is rank one:
//! `F(a) = p(1 - p) g g^T` with `g = W_H^T (m(a) * w_l)`, the input gradient
//! of the logit. Averaging `F(a)` over training activations whose predicted
//! probability falls in a window around 0.5 gives the quadratic form used to
//! compare concept directions.

use crate::error::{Error, Result};
use crate::models::BlackBoxModel;
use crate::numerics::{dot, Matrix};

/// Window used unless a caller asks for another.
pub const DEFAULT_WINDOW: (f64, f64) = (0.2, 0.8);

/// Windows of the decision-boundary sensitivity sweep, widest first.
pub const WINDOW_SWEEP: [(f64, f64); 5] =
    [(0.0, 1.0), (0.1, 0.9), (0.2, 0.8), (0.3, 0.7), (0.4, 0.6)];

/// Relative threshold below which a direction counts as having zero norm.
pub const ZERO_NORM_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    Euclidean,
    FisherAveraged,
}

impl GeometryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeometryKind::Euclidean => "euclidean",
            GeometryKind::FisherAveraged => "fisher",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub kind: GeometryKind,
    /// Symmetric `r x r` matrix.
    pub matrix: Matrix,
    /// Probability window, for the averaged Fisher form.
    pub window: Option<(f64, f64)>,
    /// Number of activations that entered the average.
    pub n_averaged: usize,
}

impl QuadraticForm {
    pub fn euclidean(r: usize) -> Self {
        QuadraticForm {
            kind: GeometryKind::Euclidean,
            matrix: Matrix::identity(r),
            window: None,
            n_averaged: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `u^T F v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.matrix.quadratic(u, v)
    }
}

/// Pointwise Fisher metric `p(1-p) g g^T` at activation `a`.
pub fn fisher_pointwise(model: &BlackBoxModel, a: &[f64]) -> Result<Matrix> {
    let (out, g) = model.input_gradient(a)?;
    let weight = out.prob * (1.0 - out.prob);
    let r = g.len();
    let mut f = Matrix::zeros(r, r);
    for i in 0..r {
        for j in 0..=i {
            let v = weight * g[i] * g[j];
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    Ok(f)
}

/// Average of the pointwise Fisher metric over the rows of `a_train` whose
/// predicted probability lies in the closed window `[p_low, p_high]`.
pub fn fisher_averaged(
    model: &BlackBoxModel,
    a_train: &Matrix,
    p_low: f64,
    p_high: f64,
) -> Result<QuadraticForm> {
    if !(0.0..=1.0).contains(&p_low) || !(0.0..=1.0).contains(&p_high) || p_low >= p_high {
        return Err(Error::InvalidArgument(format!(
            "Fisher window must satisfy 0 <= p_low < p_high <= 1, got ({p_low}, {p_high})"
        )));
    }
    if a_train.cols() != model.input_dim() {
        return Err(Error::dims(format!(
            "activations have {} columns, model expects {}",
            a_train.cols(),
            model.input_dim()
        )));
    }
    let r = a_train.cols();
    // rows sqrt(p(1-p)) g, so that F = G^T G / n
    let mut scaled = Vec::new();
    let mut n_averaged = 0;
    for a in a_train.row_iter() {
        let (out, g) = model.input_gradient(a)?;
        if out.prob >= p_low && out.prob <= p_high {
            let s = (out.prob * (1.0 - out.prob)).sqrt();
            scaled.extend(g.iter().map(|v| s * v));
            n_averaged += 1;
        }
    }
    if n_averaged == 0 {
        return Err(Error::EmptyWindow { p_low, p_high });
    }
    let g = Matrix::from_vec(n_averaged, r, scaled)?;
    let f = g
        .transpose()
        .matmul(&g)?
        .scaled(1.0 / n_averaged as f64)
        .symmetrized();
    Ok(QuadraticForm {
        kind: GeometryKind::FisherAveraged,
        matrix: f,
        window: Some((p_low, p_high)),
        n_averaged,
    })
}

/// Cosine similarities of concept directions under a quadratic form.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrices {
    pub kind: GeometryKind,
    /// Known concepts against dictionary atoms, `k_known x k_sae`.
    pub s: Matrix,
    /// Known concepts against each other, `k_known x k_known`.
    pub z: Matrix,
    /// Known concepts whose norm under the form is numerically zero.
    pub zero_norm_known: Vec<bool>,
    /// Dictionary atoms whose norm under the form is numerically zero.
    pub zero_norm_atoms: Vec<bool>,
}

impl SimilarityMatrices {
    pub fn k_known(&self) -> usize {
        self.s.rows()
    }

    pub fn k_sae(&self) -> usize {
        self.s.cols()
    }

    pub fn has_zero_norm(&self) -> bool {
        self.zero_norm_known
            .iter()
            .chain(&self.zero_norm_atoms)
            .any(|&z| z)
    }
}

fn norms(rows: &Matrix, f_rows: &Matrix, trace: f64) -> (Vec<f64>, Vec<bool>) {
    rows.row_iter()
        .zip(f_rows.row_iter())
        .map(|(v, fv)| {
            let sq = dot(v, fv);
            let zero = !(sq > ZERO_NORM_RTOL * trace * dot(v, v));
            (if zero { 0.0 } else { sq.sqrt() }, zero)
        })
        .unzip()
}

fn normalise(raw: &Matrix, left: &[f64], right: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(raw.rows(), raw.cols());
    for i in 0..raw.rows() {
        for j in 0..raw.cols() {
            let denom = left[i] * right[j];
            if denom > 0.0 {
                out[(i, j)] = (raw[(i, j)] / denom).clamp(-1.0, 1.0);
            }
        }
    }
    out
}

/// `S_ij = q_i^T F d_j / (|q_i|_F |d_j|_F)` and `Z_rl` likewise for pairs of
/// known concepts. Entries involving a zero-norm direction are 0.
pub fn similarity(q: &Matrix, d: &Matrix, form: &QuadraticForm) -> Result<SimilarityMatrices> {
    let r = form.dim();
    if q.cols() != r || d.cols() != r {
        return Err(Error::dims(format!(
            "Q is {:?}, D is {:?}, form is {r}x{r}",
            q.shape(),
            d.shape()
        )));
    }
    // F symmetric, so rows of Q F are F q_i
    let qf = q.matmul(&form.matrix)?;
    let df = d.matmul(&form.matrix)?;
    let trace = form.matrix.trace();
    let (q_norm, zero_norm_known) = norms(q, &qf, trace);
    let (d_norm, zero_norm_atoms) = norms(d, &df, trace);
    let s = normalise(&qf.matmul_transposed(d)?, &q_norm, &d_norm);
    let mut z = normalise(&qf.matmul_transposed(q)?, &q_norm, &q_norm);
    // exact symmetry regardless of summation order
    for i in 0..z.rows() {
        for j in 0..i {
            let v = 0.5 * (z[(i, j)] + z[(j, i)]);
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    Ok(SimilarityMatrices {
        kind: form.kind,
        s,
        z,
        zero_norm_known,
        zero_norm_atoms,
    })
}
