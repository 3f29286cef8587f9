//! Sign contradictions between pairs of known concepts mediated by
//! unsupervised directions, and semantic fidelity of predicted concepts.
//!
//! A triplet `(q_r, q_l, d_j)` is frustrated when `sign(Z_rl)` disagrees with
//! `sign(S_rj S_lj)`. Zeros carry sign 0 and never frustrate.

use crate::error::{Error, Result};
use crate::geometry::{GeometryKind, SimilarityMatrices};
use crate::numerics::{frobenius_norm, sample_covariance, Matrix};

#[inline]
fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// True iff `sign(z_rl) * sign(s_rj) * sign(s_lj) == -1`.
pub fn triplet_frustrated(z_rl: f64, s_rj: f64, s_lj: f64) -> bool {
    sign(z_rl) * sign(s_rj) * sign(s_lj) == -1
}

/// The frustrating direction with the largest `|S_rj S_lj|`, lowest index on
/// ties, or `None` if the pair is unfrustrated.
pub fn max_frustrating_direction(
    r: usize,
    l: usize,
    sims: &SimilarityMatrices,
) -> Option<(usize, f64)> {
    assert_ne!(r, l, "a concept pair needs two distinct indices");
    let z = sims.z[(r, l)];
    let (sr, sl) = (sims.s.row(r), sims.s.row(l));
    let mut best: Option<(usize, f64)> = None;
    for (j, (&a, &b)) in sr.iter().zip(sl).enumerate() {
        if triplet_frustrated(z, a, b) {
            let mag = (a * b).abs();
            if best.is_none_or(|(_, m)| mag > m) {
                best = Some((j, mag));
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrustrationReport {
    pub kind: GeometryKind,
    /// Symmetric `k x k` matrix of `Frust(r, l)` with zero diagonal.
    pub pairwise: Matrix,
    /// `j*(r, l)` for `r != l`; `None` on the diagonal and for unfrustrated pairs.
    pub j_star: Vec<Vec<Option<usize>>>,
    pub gamma: f64,
    pub zero_norm_known: Vec<bool>,
    pub zero_norm_atoms: Vec<bool>,
}

impl FrustrationReport {
    pub fn frust(&self, r: usize, l: usize) -> f64 {
        self.pairwise[(r, l)]
    }

    /// One `(r, l, j_star, frust)` record per unordered pair, `l < r`.
    pub fn pairs(&self) -> Vec<(usize, usize, Option<usize>, f64)> {
        let k = self.pairwise.rows();
        let mut out = Vec::with_capacity(k * (k - 1) / 2);
        for r in 0..k {
            for l in 0..r {
                out.push((r, l, self.j_star[r][l], self.pairwise[(r, l)]));
            }
        }
        out
    }
}

/// Pairwise frustration for every known pair and its average `gamma`.
pub fn global_frustration(sims: &SimilarityMatrices) -> Result<FrustrationReport> {
    let k = sims.k_known();
    if k < 2 {
        return Err(Error::TooFewConcepts(k));
    }
    let mut pairwise = Matrix::zeros(k, k);
    let mut j_star = vec![vec![None; k]; k];
    let mut total = 0.0;
    for r in 0..k {
        for l in 0..r {
            if let Some((j, mag)) = max_frustrating_direction(r, l, sims) {
                pairwise[(r, l)] = mag;
                pairwise[(l, r)] = mag;
                j_star[r][l] = Some(j);
                j_star[l][r] = Some(j);
                total += mag;
            }
        }
    }
    let gamma = 2.0 * total / (k * (k - 1)) as f64;
    Ok(FrustrationReport {
        kind: sims.kind,
        pairwise,
        j_star,
        gamma,
        zero_norm_known: sims.zero_norm_known.clone(),
        zero_norm_atoms: sims.zero_norm_atoms.clone(),
    })
}

/// `||cov_pred - b_known||_F / ||b_known||_F`.
pub fn semantic_fidelity(cov_pred: &Matrix, b_known: &Matrix) -> Result<f64> {
    if cov_pred.shape() != b_known.shape() || !b_known.is_square() {
        return Err(Error::dims(format!(
            "predicted covariance {:?} against reference {:?}",
            cov_pred.shape(),
            b_known.shape()
        )));
    }
    let denom = frobenius_norm(b_known);
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(frobenius_norm(&cov_pred.sub(b_known)?) / denom)
}

/// Semantic fidelity of predicted concepts `c_hat` (one row per example),
/// using their sample covariance with divisor `n - 1`.
pub fn semantic_fidelity_of_predictions(c_hat: &Matrix, b_known: &Matrix) -> Result<f64> {
    semantic_fidelity(&sample_covariance(c_hat)?, b_known)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use proptest::prelude::*;

    fn sims(s: Matrix, z: Matrix) -> SimilarityMatrices {
        let (k, m) = s.shape();
        SimilarityMatrices {
            kind: GeometryKind::FisherAveraged,
            s,
            z,
            zero_norm_known: vec![false; k],
            zero_norm_atoms: vec![false; m],
        }
    }

    fn random_sims(rng: &mut RngStream, k: usize, m: usize) -> SimilarityMatrices {
        let mut s = Matrix::zeros(k, m);
        for v in s.as_mut_slice() {
            *v = 2.0 * rng.uniform() - 1.0;
        }
        let mut z = Matrix::identity(k);
        for r in 0..k {
            for l in 0..r {
                let v = 2.0 * rng.uniform() - 1.0;
                z[(r, l)] = v;
                z[(l, r)] = v;
            }
        }
        sims(s, z)
    }

    #[test]
    fn triplet_examples() {
        assert!(triplet_frustrated(-0.5, -0.4, -0.3));
        assert!(!triplet_frustrated(0.5, 0.4, 0.3));
        assert!(!triplet_frustrated(0.0, 0.4, -0.3));
        assert!(!triplet_frustrated(0.5, 0.0, -0.3));
        assert!(!triplet_frustrated(-0.5, 0.4, 0.0));
    }

    #[test]
    fn matches_spin_rule_when_nonzero() {
        let mut rng = RngStream::new(7);
        for _ in 0..1000 {
            let (z, a, b) = (rng.normal(), rng.normal(), rng.normal());
            assert_eq!(triplet_frustrated(z, a, b), z * a * b < 0.0);
        }
    }

    #[test]
    fn unfrustrated_pair_returns_none() {
        let s = Matrix::from_rows(&[[0.5, -0.2], [0.5, -0.2]]);
        let z = Matrix::from_rows(&[[1.0, 0.3], [0.3, 1.0]]);
        assert_eq!(max_frustrating_direction(0, 1, &sims(s, z)), None);
    }

    #[test]
    fn single_frustrating_column() {
        let s = Matrix::from_rows(&[[0.4, 0.9], [-0.3, 0.9]]);
        let z = Matrix::from_rows(&[[1.0, 0.3], [0.3, 1.0]]);
        let (j, mag) = max_frustrating_direction(0, 1, &sims(s, z)).unwrap();
        assert_eq!(j, 0);
        assert!((mag - 0.12).abs() < 1e-15);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let s = Matrix::from_rows(&[[0.5, 0.2, -0.5], [-0.5, 0.2, 0.5]]);
        let z = Matrix::from_rows(&[[1.0, 0.3], [0.3, 1.0]]);
        assert_eq!(
            max_frustrating_direction(1, 0, &sims(s, z)),
            Some((0, 0.25))
        );
    }

    #[test]
    fn argmax_matches_exhaustive_scan() {
        let mut rng = RngStream::new(11);
        for _ in 0..200 {
            let sm = random_sims(&mut rng, 3, 5);
            for r in 0..3 {
                for l in 0..3 {
                    if r == l {
                        continue;
                    }
                    let mut expect: Option<(usize, f64)> = None;
                    for j in 0..5 {
                        let (a, b, z) = (sm.s[(r, j)], sm.s[(l, j)], sm.z[(r, l)]);
                        let frustrated = z.signum() != (a * b).signum() && z != 0.0 && a * b != 0.0;
                        if frustrated && expect.is_none_or(|(_, m)| (a * b).abs() > m) {
                            expect = Some((j, (a * b).abs()));
                        }
                    }
                    assert_eq!(max_frustrating_direction(r, l, &sm), expect);
                }
            }
        }
    }

    #[test]
    fn consistent_structure_has_zero_gamma() {
        let s = Matrix::from_rows(&[[0.5, 0.5], [0.4, 0.1], [0.9, 0.3]]);
        let z = Matrix::from_rows(&[[1.0, 0.2, 0.3], [0.2, 1.0, 0.4], [0.3, 0.4, 1.0]]);
        let rep = global_frustration(&sims(s, z)).unwrap();
        assert_eq!(rep.gamma, 0.0);
        assert!(rep.pairs().iter().all(|p| p.2.is_none()));
    }

    #[test]
    fn maximal_frustration_has_unit_gamma() {
        let s = Matrix::from_rows(&[[1.0], [1.0], [1.0]]);
        let z = Matrix::from_rows(&[[1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]);
        let rep = global_frustration(&sims(s, z)).unwrap();
        assert_eq!(rep.gamma, 1.0);
        assert_eq!(rep.j_star[2][0], Some(0));
    }

    #[test]
    fn too_few_concepts() {
        let s = Matrix::from_rows(&[[1.0, 0.0]]);
        let z = Matrix::identity(1);
        assert!(matches!(
            global_frustration(&sims(s, z)),
            Err(Error::TooFewConcepts(1))
        ));
    }

    #[test]
    fn fidelity_reference_values() {
        let b = Matrix::from_rows(&[[1.0, 0.3], [0.3, 2.0]]);
        assert_eq!(semantic_fidelity(&b, &b).unwrap(), 0.0);
        assert!((semantic_fidelity(&b.scaled(2.0), &b).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            semantic_fidelity(&b, &Matrix::zeros(2, 2)),
            Err(Error::ZeroReference)
        ));
        assert!(matches!(
            semantic_fidelity(&b, &Matrix::zeros(3, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn gamma_bounded_symmetric_and_permutation_invariant(seed in 0u64..10_000) {
            let mut rng = RngStream::new(seed);
            let sm = random_sims(&mut rng, 4, 6);
            let rep = global_frustration(&sm).unwrap();
            prop_assert!((0.0..=1.0).contains(&rep.gamma));
            for r in 0..4 {
                prop_assert_eq!(rep.pairwise[(r, r)], 0.0);
                for l in 0..4 {
                    prop_assert_eq!(rep.frust(r, l), rep.frust(l, r));
                }
            }
            let mut sum = 0.0;
            for (_, _, _, f) in rep.pairs() {
                sum += f;
            }
            prop_assert!((rep.gamma - sum / 6.0).abs() < 1e-15);

            let perm_k = rng.permutation(4);
            let perm_m = rng.permutation(6);
            let s2 = Matrix::from_rows(&perm_k.iter().map(|&i| perm_m.iter().map(|&j| sm.s[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>());
            let z2 = Matrix::from_rows(&perm_k.iter().map(|&i| perm_k.iter().map(|&j| sm.z[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>());
            let rep2 = global_frustration(&sims(s2, z2)).unwrap();
            prop_assert!((rep.gamma - rep2.gamma).abs() < 1e-12);
        }
    }
}
