//! Small dense linear algebra and seeded random sampling.
//!
//! Everything here is deliberately plain: row-major `Vec<f64>` storage, no
//! BLAS, no SIMD. The matrices in this crate are at most a few hundred on a
//! side, and bitwise reproducibility across runs matters more than speed.
//!
//! Random numbers come from [`RngStream`], a thin wrapper over
//! xoshiro256++ seeded through SplitMix64. Normal variates use the ziggurat
//! sampler from `rand_distr`. Parallel workers derive their streams as
//! `base_seed + worker_index`.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Relative tolerance used when checking a matrix for symmetry.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Number of jitter escalations attempted by [`cholesky`].
pub const CHOLESKY_MAX_JITTER_STEPS: usize = 3;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix must be at least 1x1");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dims(format!("matrix shape {rows}x{cols} is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged or empty input;
    /// intended for literals and tests.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        assert!(!rows.is_empty(), "no rows");
        let cols = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix::from_vec(rows.len(), cols, data).expect("valid literal")
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Matrix::from_vec(v.len(), 1, v.to_vec()).expect("non-empty vector")
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Matrix::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dims(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`, avoiding the explicit transpose.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dims(format!(
                "cannot multiply {}x{} by ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out[(i, j)] = dot(self.row(i), other.row(j));
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::dims(format!(
                "cannot multiply {}x{} by a {}-vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self.row_iter().map(|r| dot(r, v)).collect())
    }

    /// `self^T v`.
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::dims(format!(
                "cannot multiply ({}x{})^T by a {}-vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &x) in self.row_iter().zip(v) {
            axpy(x, r, &mut out);
        }
        Ok(out)
    }

    /// `u^T self v` for a square matrix.
    pub fn quadratic(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert!(u.len() == self.rows && v.len() == self.cols);
        self.row_iter().zip(u).map(|(r, &ui)| ui * dot(r, v)).sum()
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dims(format!(
                "shape {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest `|m_ij - m_ji|` relative to the largest entry magnitude.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// `(M + M^T) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec(idx.len(), self.cols, data).expect("non-empty selection")
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for r in self.row_iter() {
            data.extend(idx.iter().map(|&j| r[j]));
        }
        Matrix::from_vec(self.rows, idx.len(), data).expect("non-empty selection")
    }

    /// Copy of the block starting at `(r0, c0)` with the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(r0 + i)[c0..c0 + cols]);
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Matrix) {
        for i in 0..src.rows {
            self.row_mut(r0 + i)[c0..c0 + src.cols].copy_from_slice(src.row(i));
        }
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for r in self.row_iter() {
            axpy(1.0, r, &mut mean);
        }
        let n = self.rows as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.row_iter() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lower-triangular Cholesky factor `L` with `L L^T = m`.
///
/// On a non-positive pivot the decomposition is retried with
/// `1e-10 * trace(m) / k` added to the diagonal, escalating by a factor of ten
/// up to [`CHOLESKY_MAX_JITTER_STEPS`] times.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::dims(format!(
            "cholesky of non-square {}x{}",
            m.rows, m.cols
        )));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let k = m.rows;
    let base = (1e-10 * m.trace() / k as f64).abs().max(f64::MIN_POSITIVE);
    let mut jitter = 0.0;
    let mut last = (0, 0.0);
    for step in 0..=CHOLESKY_MAX_JITTER_STEPS {
        match cholesky_unjittered(m, jitter) {
            Ok(l) => return Ok(l),
            Err(fail) => last = fail,
        }
        jitter = base * 10f64.powi(step as i32);
    }
    Err(Error::NotPositiveDefinite {
        index: last.0,
        pivot: last.1,
    })
}

fn cholesky_unjittered(m: &Matrix, jitter: f64) -> std::result::Result<Matrix, (usize, f64)> {
    let k = m.rows;
    let mut l = Matrix::zeros(k, k);
    for j in 0..k {
        let lj = &l.data[j * k..j * k + j];
        let d = m[(j, j)] + jitter - dot(lj, lj);
        if !(d > 0.0) || !d.is_finite() {
            return Err((j, d));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..k {
            let s = m[(i, j)] - dot(&l.data[i * k..i * k + j], &l.data[j * k..j * k + j]);
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the lower Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let k = l.rows;
    if b.len() != k {
        return Err(Error::dims(format!(
            "rhs of length {} for {k}x{k} factor",
            b.len()
        )));
    }
    let mut y = b.to_vec();
    for i in 0..k {
        let s = dot(&l.row(i)[..i], &y[..i]);
        y[i] = (y[i] - s) / l[(i, i)];
    }
    for i in (0..k).rev() {
        let mut s = y[i];
        for j in (i + 1)..k {
            s -= l[(j, i)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    Ok(y)
}

/// Solves `L X = B` by forward substitution for lower-triangular `L`.
pub fn solve_lower_triangular(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !l.is_square() || b.rows != l.rows {
        return Err(Error::dims(format!(
            "rhs has {} rows, factor is {}x{}",
            b.rows, l.rows, l.cols
        )));
    }
    let mut out = b.clone();
    for j in 0..b.cols {
        for i in 0..l.rows {
            let mut s = out[(i, j)];
            for t in 0..i {
                s -= l[(i, t)] * out[(t, j)];
            }
            out[(i, j)] = s / l[(i, i)];
        }
    }
    Ok(out)
}

/// Solves `L L^T X = B` column by column.
pub fn cholesky_solve_matrix(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    if b.rows != l.rows {
        return Err(Error::dims(format!(
            "rhs has {} rows, factor is {}",
            b.rows, l.rows
        )));
    }
    let mut out = Matrix::zeros(b.rows, b.cols);
    for j in 0..b.cols {
        let x = cholesky_solve(l, &b.column(j))?;
        for (i, xi) in x.into_iter().enumerate() {
            out[(i, j)] = xi;
        }
    }
    Ok(out)
}

/// Mean-centred sample covariance of the rows of `x`, divisor `n - 1`.
pub fn sample_covariance(x: &Matrix) -> Result<Matrix> {
    let n = x.rows;
    if n < 2 {
        return Err(Error::dims("sample covariance needs at least two rows"));
    }
    let mean = x.column_means();
    let p = x.cols;
    let mut cov = Matrix::zeros(p, p);
    let mut centred = vec![0.0; p];
    for r in x.row_iter() {
        for ((c, &v), &m) in centred.iter_mut().zip(r).zip(&mean) {
            *c = v - m;
        }
        for i in 0..p {
            let ci = centred[i];
            let row = cov.row_mut(i);
            for j in i..p {
                row[j] += ci * centred[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..p {
        for j in i..p {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// Seeded pseudo-random stream: xoshiro256++ with ziggurat normals.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream for the worker or grid cell at `index`: seed `base_seed + index`.
    pub fn derive(base_seed: u64, index: u64) -> Self {
        RngStream::new(base_seed.wrapping_add(index))
    }

    /// Named sub-stream of a run seed, used to keep data generation, model
    /// initialisation and Monte Carlo draws from sharing a sequence.
    pub fn substream(seed: u64, tag: u64) -> Self {
        RngStream::new(mix_seed(seed, tag))
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `[0, n)`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = self.normal());
    }

    /// Matrix with i.i.d. `N(0, std^2)` entries.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize, std: f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        m.as_mut_slice()
            .iter_mut()
            .for_each(|x| *x = std * self.normal());
        m
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

/// SplitMix64 finaliser over `seed` and `tag`.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `n` rows `x = L z` with `z ~ N(0, I)`.
pub fn sample_gaussian(chol: &Matrix, n: usize, rng: &mut RngStream) -> Matrix {
    assert!(n >= 1, "sample count must be positive");
    let k = chol.rows;
    let mut out = Matrix::zeros(n, k);
    let mut z = vec![0.0; k];
    for i in 0..n {
        rng.fill_normal(&mut z);
        let row = out.row_mut(i);
        for (a, x) in row.iter_mut().enumerate() {
            // lower-triangular: only the first a+1 entries contribute
            *x = dot(&chol.row(a)[..=a], &z[..=a]);
        }
    }
    out
}
