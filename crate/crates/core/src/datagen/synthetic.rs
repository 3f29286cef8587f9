//! Linear-Gaussian concepts with a tunable known/unknown coupling.
//!
//! Concepts `chi = (chi_k, chi_u) ~ N(0, B(alpha))` with
//!
//! ```text
//! B(alpha) = [ B_known   M          ]
//!            [ M^T       B_temp + M^T B_known^{-1} M ]
//! ```
//!
//! where each unknown concept `u` mediates one known pair `(i(u), j(u))`.
//! For `alpha > 0` the mediated sign pattern contradicts `B_known`, for
//! `alpha < 0` it agrees, and `alpha = 0` decouples the blocks. Labels are
//! `1{psi_k . chi_k + psi_u . chi_u + eta > 0}` and activations are
//! `Phi chi + eps`.
//!
//! Everything except `alpha` and `omega` is drawn from a structure stream of
//! the seed, and the per-example draws come from a separate sample stream, so
//! runs that differ only in `alpha` or `omega` share `B_known`, `B_temp`,
//! `psi*`, `Phi` and the underlying standard-normal draws.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{cholesky, dot, sample_gaussian, solve_lower_triangular, Matrix, RngStream};

const TAG_STRUCTURE: u64 = 0x7379_6e74_6873_7472;
const TAG_SAMPLES: u64 = 0x7379_6e74_6873_6d70;

/// Known pairs with `|b_ij|` below this are never mediated.
pub const MIN_PAIR_COUPLING: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    /// Total number of concepts.
    pub k: usize,
    pub k_known: usize,
    /// Activation dimension.
    pub r: usize,
    pub sigma_a: f64,
    pub sigma_y: f64,
    pub alpha: f64,
    pub omega: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 8000,
            k: 50,
            k_known: 10,
            r: 64,
            sigma_a: 0.3,
            sigma_y: 1.5,
            alpha: 0.0,
            omega: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn k_unknown(&self) -> usize {
        self.k - self.k_known
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_known == 0 || self.k_known >= self.k {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= k_known < k, got k_known = {}, k = {}",
                self.k_known, self.k
            )));
        }
        if self.n == 0 || self.r == 0 {
            return Err(Error::InvalidArgument("n and r must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [-1, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::InvalidArgument(format!(
                "omega must lie in [0, 1], got {}",
                self.omega
            )));
        }
        if !(self.sigma_a >= 0.0) || !(self.sigma_y >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise scales must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Random SPD matrix: `G G^T / dim + 0.5 I`, rescaled to unit diagonal.
pub fn sample_spd(dim: usize, rng: &mut RngStream) -> Matrix {
    assert!(dim >= 1, "sample_spd needs dim >= 1");
    let g = rng.normal_matrix(dim, dim, 1.0);
    let mut b = g
        .matmul_transposed(&g)
        .expect("square")
        .scaled(1.0 / dim as f64);
    for i in 0..dim {
        b[(i, i)] += 0.5;
    }
    let scale: Vec<f64> = (0..dim).map(|i| 1.0 / b[(i, i)].sqrt()).collect();
    let mut out = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let v = if i == j {
                1.0
            } else {
                b[(i, j)] * scale[i] * scale[j]
            };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Known pair mediated by each unknown concept: pairs `i < j` in
/// lexicographic order, skipping near-zero couplings, assigned cyclically.
pub fn pair_assignment(b_known: &Matrix, k_unknown: usize) -> Result<Vec<(usize, usize)>> {
    let k = b_known.rows();
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            if b_known[(i, j)].abs() >= MIN_PAIR_COUPLING {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no known pair has |b_ij| >= {MIN_PAIR_COUPLING}; cannot mediate unknown concepts"
        )));
    }
    Ok((0..k_unknown).map(|u| pairs[u % pairs.len()]).collect())
}

/// Interaction matrix `M(alpha)`, `k_known x k_unknown`, with two nonzero
/// entries per column.
pub fn build_m(b_known: &Matrix, alpha: f64, assignment: &[(usize, usize)]) -> Result<Matrix> {
    let k = b_known.rows();
    let mut m = Matrix::zeros(k, assignment.len().max(1));
    if assignment.is_empty() {
        return Err(Error::InvalidArgument(
            "assignment must cover at least one unknown concept".into(),
        ));
    }
    let sign = if alpha > 0.0 {
        1.0
    } else if alpha < 0.0 {
        -1.0
    } else {
        0.0
    };
    for (u, &(i, j)) in assignment.iter().enumerate() {
        if i == j {
            return Err(Error::InvalidAssignment { unknown: u, i, j });
        }
        if i >= k || j >= k {
            return Err(Error::dims(format!(
                "pair ({i}, {j}) out of range for {k} known concepts"
            )));
        }
        let b = b_known[(i, j)];
        m[(i, u)] = b * alpha.abs();
        m[(j, u)] = -sign * b.abs() * alpha.abs();
    }
    Ok(m)
}

/// Full covariance `B(alpha)` from its blocks. The unknown block is formed
/// as `B_temp + Y^T Y` with `Y = L^{-1} M`, which is exactly symmetric.
pub fn build_b(b_known: &Matrix, b_temp: &Matrix, m: &Matrix) -> Result<Matrix> {
    let (kk, ku) = (b_known.rows(), b_temp.rows());
    if m.shape() != (kk, ku) || !b_known.is_square() || !b_temp.is_square() {
        return Err(Error::dims(format!(
            "B_known {:?}, B_temp {:?}, M {:?}",
            b_known.shape(),
            b_temp.shape(),
            m.shape()
        )));
    }
    let l = cholesky(b_known)?;
    let y = solve_lower_triangular(&l, m)?;
    let mut b_uu = y.transpose().matmul(&y)?;
    for i in 0..ku {
        for j in 0..=i {
            let v = b_temp[(i, j)] + 0.5 * (b_uu[(i, j)] + b_uu[(j, i)]);
            b_uu[(i, j)] = v;
            b_uu[(j, i)] = v;
        }
    }
    let mut b = Matrix::zeros(kk + ku, kk + ku);
    b.set_block(0, 0, b_known);
    b.set_block(0, kk, m);
    b.set_block(kk, 0, &m.transpose());
    b.set_block(kk, kk, &b_uu);
    Ok(b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceBlocks {
    pub b_known: Matrix,
    pub b_temp: Matrix,
    /// `M(alpha)`, `k_known x k_unknown`.
    pub m: Matrix,
    pub b_full: Matrix,
    pub assignment: Vec<(usize, usize)>,
    pub alpha: f64,
}

impl CovarianceBlocks {
    pub fn new(
        b_known: Matrix,
        b_temp: Matrix,
        alpha: f64,
        assignment: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let m = build_m(&b_known, alpha, &assignment)?;
        let b_full = build_b(&b_known, &b_temp, &m)?;
        Ok(CovarianceBlocks {
            b_known,
            b_temp,
            m,
            b_full,
            assignment,
            alpha,
        })
    }

    pub fn k_known(&self) -> usize {
        self.b_known.rows()
    }

    pub fn k_unknown(&self) -> usize {
        self.b_temp.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskWeights {
    pub psi_k: Vec<f64>,
    pub psi_u: Vec<f64>,
    /// Unscaled base vector `psi*`.
    pub psi_star: Vec<f64>,
    pub omega: f64,
}

impl TaskWeights {
    /// `psi = ((1 - omega) psi*_known, omega psi*_unknown)`.
    pub fn from_base(psi_star: Vec<f64>, k_known: usize, omega: f64) -> Self {
        let psi_k = psi_star[..k_known]
            .iter()
            .map(|v| (1.0 - omega) * v)
            .collect();
        let psi_u = psi_star[k_known..].iter().map(|v| omega * v).collect();
        TaskWeights {
            psi_k,
            psi_u,
            psi_star,
            omega,
        }
    }
}

pub fn build_task_weights(
    omega: f64,
    k_known: usize,
    k: usize,
    rng: &mut RngStream,
) -> TaskWeights {
    assert!(k_known <= k);
    let psi_star = (0..k).map(|_| rng.normal()).collect();
    TaskWeights::from_base(psi_star, k_known, omega)
}

/// The parts of a synthetic problem that do not depend on `alpha` or `omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticStructure {
    pub b_known: Matrix,
    pub b_temp: Matrix,
    pub assignment: Vec<(usize, usize)>,
    pub psi_star: Vec<f64>,
    /// `r x k`.
    pub phi: Matrix,
}

impl SyntheticStructure {
    /// Draws `B_known`, `B_temp`, `psi*` and `Phi` from the structure stream
    /// of `seed`.
    pub fn sample(k: usize, k_known: usize, r: usize, seed: u64) -> Result<Self> {
        if k_known == 0 || k_known >= k {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= k_known < k, got {k_known} and {k}"
            )));
        }
        let mut rng = RngStream::substream(seed, TAG_STRUCTURE);
        let b_known = sample_spd(k_known, &mut rng);
        let b_temp = sample_spd(k - k_known, &mut rng);
        let psi_star = (0..k).map(|_| rng.normal()).collect();
        let phi = rng.normal_matrix(r, k, 1.0);
        let assignment = pair_assignment(&b_known, k - k_known)?;
        Ok(SyntheticStructure {
            b_known,
            b_temp,
            assignment,
            psi_star,
            phi,
        })
    }

    pub fn k_known(&self) -> usize {
        self.b_known.rows()
    }

    pub fn k(&self) -> usize {
        self.psi_star.len()
    }

    pub fn blocks(&self, alpha: f64) -> Result<CovarianceBlocks> {
        CovarianceBlocks::new(
            self.b_known.clone(),
            self.b_temp.clone(),
            alpha,
            self.assignment.clone(),
        )
    }

    pub fn weights(&self, omega: f64) -> TaskWeights {
        TaskWeights::from_base(self.psi_star.clone(), self.k_known(), omega)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    /// All `k` concept columns; `known` is `0..k_known`.
    pub dataset: Dataset,
    pub blocks: CovarianceBlocks,
    pub weights: TaskWeights,
    pub phi: Matrix,
}

/// Samples `n` examples for a fixed structure. The per-example draws come
/// from `sample_seed` only, in a fixed order that does not depend on
/// `alpha` or `omega`.
pub fn generate_from_structure(
    structure: &SyntheticStructure,
    alpha: f64,
    omega: f64,
    n: usize,
    sigma_a: f64,
    sigma_y: f64,
    sample_seed: u64,
) -> Result<SyntheticData> {
    let blocks = structure.blocks(alpha)?;
    let weights = structure.weights(omega);
    let kk = structure.k_known();
    let chol = cholesky(&blocks.b_full)?;
    let mut rng = RngStream::new(sample_seed);
    let chi = sample_gaussian(&chol, n, &mut rng);
    let mut a = chi.matmul_transposed(&structure.phi)?;
    for v in a.as_mut_slice() {
        *v += sigma_a * rng.normal();
    }
    let labels = chi
        .row_iter()
        .map(|x| {
            let tau = dot(&weights.psi_k, &x[..kk])
                + dot(&weights.psi_u, &x[kk..])
                + sigma_y * rng.normal();
            (tau > 0.0) as u8
        })
        .collect();
    let dataset = Dataset::new(a, chi, (0..kk).collect(), labels)?;
    Ok(SyntheticData {
        dataset,
        blocks,
        weights,
        phi: structure.phi.clone(),
    })
}

pub fn generate_synthetic_dataset(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let structure = SyntheticStructure::sample(cfg.k, cfg.k_known, cfg.r, cfg.seed)?;
    generate_from_structure(
        &structure,
        cfg.alpha,
        cfg.omega,
        cfg.n,
        cfg.sigma_a,
        cfg.sigma_y,
        crate::numerics::mix_seed(cfg.seed, TAG_SAMPLES),
    )
}
