//! Best achievable accuracy from known concepts in the linear-Gaussian model.
//!
//! Given `chi_k`, the latent score is `tau | chi_k ~ N(phi . chi_k, sigma_R^2)`
//! with `phi = psi_k + B_kk^{-1} B_ku psi_u` and
//! `sigma_R^2 = psi_u^T B_temp psi_u + sigma_y^2`. The Bayes classifier is
//! `1{phi . chi_k > 0}` and its accuracy is
//! `1/2 + atan(sigma_S / sigma_R) / pi` with `sigma_S^2 = phi^T B_kk phi`.
//! Expanding `sigma_S^2` gives `T1 + 2 T2 + T3`:
//!
//! * `T1 = psi_k^T B_kk psi_k`
//! * `T2 = psi_k^T B_ku psi_u`
//! * `T3 = (B_ku psi_u)^T B_kk^{-1} (B_ku psi_u)`
//! * `T4 = psi_u^T B_temp psi_u`, the part of the signal no function of
//!   `chi_k` can see.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::datagen::{CovarianceBlocks, TaskWeights};
use crate::error::{Error, Result};
use crate::numerics::{cholesky, cholesky_solve, dot, Matrix, RngStream};

/// Number of independent shards in the Monte Carlo estimate. Fixed so that
/// the result does not depend on the thread count.
pub const MC_SHARDS: u64 = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyDecomposition {
    pub phi: Vec<f64>,
    pub acc_closed: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub sigma_s2: f64,
    pub sigma_r2: f64,
}

/// `psi_k + B_kk^{-1} B_ku psi_u`, by a Cholesky solve.
pub fn phi_alpha(psi_k: &[f64], psi_u: &[f64], b_kk: &Matrix, b_ku: &Matrix) -> Result<Vec<f64>> {
    if b_kk.rows() != psi_k.len() || b_ku.shape() != (psi_k.len(), psi_u.len()) {
        return Err(Error::dims(format!(
            "psi_k {}, psi_u {}, B_kk {:?}, B_ku {:?}",
            psi_k.len(),
            psi_u.len(),
            b_kk.shape(),
            b_ku.shape()
        )));
    }
    let l = cholesky(b_kk)?;
    let shift = cholesky_solve(&l, &b_ku.matvec(psi_u)?)?;
    Ok(psi_k.iter().zip(&shift).map(|(a, b)| a + b).collect())
}

/// `1/2 + atan(sqrt(sigma_s2 / sigma_r2)) / pi`.
pub fn accuracy_from_variances(sigma_s2: f64, sigma_r2: f64) -> Result<f64> {
    if !(sigma_r2 > 0.0) {
        return Err(Error::DegenerateDenominator(sigma_r2));
    }
    Ok(0.5 + (sigma_s2.max(0.0) / sigma_r2).sqrt().atan() / PI)
}

/// `1/2 + asin(sigma_S / sqrt(sigma_S^2 + sigma_R^2)) / pi`, the same
/// quantity written through the correlation of `S` and `S + R`.
pub fn accuracy_arcsin(sigma_s2: f64, sigma_r2: f64) -> Result<f64> {
    if !(sigma_r2 > 0.0) {
        return Err(Error::DegenerateDenominator(sigma_r2));
    }
    let s2 = sigma_s2.max(0.0);
    Ok(0.5 + (s2 / (s2 + sigma_r2)).sqrt().asin() / PI)
}

pub fn closed_form_accuracy(
    blocks: &CovarianceBlocks,
    weights: &TaskWeights,
    sigma_y: f64,
) -> Result<AccuracyDecomposition> {
    let (psi_k, psi_u) = (&weights.psi_k, &weights.psi_u);
    if psi_k.len() != blocks.k_known() || psi_u.len() != blocks.k_unknown() {
        return Err(Error::dims(format!(
            "weights ({}, {}) for blocks ({}, {})",
            psi_k.len(),
            psi_u.len(),
            blocks.k_known(),
            blocks.k_unknown()
        )));
    }
    let b_kk = &blocks.b_known;
    let l = cholesky(b_kk)?;
    let m_psi = blocks.m.matvec(psi_u)?;
    let shift = cholesky_solve(&l, &m_psi)?;
    let phi: Vec<f64> = psi_k.iter().zip(&shift).map(|(a, b)| a + b).collect();

    let t1 = b_kk.quadratic(psi_k, psi_k);
    let t2 = dot(psi_k, &m_psi);
    let t3 = dot(&m_psi, &shift);
    let t4 = blocks.b_temp.quadratic(psi_u, psi_u);
    let sigma_s2 = b_kk.quadratic(&phi, &phi);
    let sigma_r2 = t4 + sigma_y * sigma_y;
    let acc_closed = accuracy_from_variances(sigma_s2, sigma_r2)?;
    Ok(AccuracyDecomposition {
        phi,
        acc_closed,
        t1,
        t2,
        t3,
        t4,
        sigma_s2,
        sigma_r2,
    })
}

/// `1{phi . chi_k > 0}`; the boundary goes to 0.
pub fn bayes_predict(phi: &[f64], chi_k: &[f64]) -> u8 {
    (dot(phi, chi_k) > 0.0) as u8
}

/// Empirical accuracy of the Bayes classifier on `n_mc` fresh draws of
/// `(chi, eta)`. The draws are split into [`MC_SHARDS`] shards, each with its
/// own sub-stream of `seed`, and evaluated in parallel.
pub fn monte_carlo_accuracy(
    blocks: &CovarianceBlocks,
    weights: &TaskWeights,
    sigma_y: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be at least 1".into()));
    }
    let kk = blocks.k_known();
    let k = kk + blocks.k_unknown();
    let chol = cholesky(&blocks.b_full)?;
    let phi = phi_alpha(&weights.psi_k, &weights.psi_u, &blocks.b_known, &blocks.m)?;
    let psi: Vec<f64> = weights
        .psi_k
        .iter()
        .chain(&weights.psi_u)
        .copied()
        .collect();
    let shards = MC_SHARDS as usize;
    let hits: Vec<usize> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let count = n_mc / shards + usize::from(s < n_mc % shards);
            let mut rng = RngStream::substream(seed, s as u64);
            let mut z = vec![0.0; k];
            let mut chi = vec![0.0; k];
            let mut hits = 0;
            for _ in 0..count {
                rng.fill_normal(&mut z);
                for i in 0..k {
                    chi[i] = dot(&chol.row(i)[..=i], &z[..=i]);
                }
                let tau = dot(&psi, &chi) + sigma_y * rng.normal();
                if bayes_predict(&phi, &chi[..kk]) == (tau > 0.0) as u8 {
                    hits += 1;
                }
            }
            hits
        })
        .collect();
    Ok(hits.iter().sum::<usize>() as f64 / n_mc as f64)
}

/// Binomial standard error of an accuracy estimate at `acc` from `n` draws.
pub fn binomial_se(acc: f64, n: usize) -> f64 {
    (acc * (1.0 - acc) / n as f64).sqrt()
}
