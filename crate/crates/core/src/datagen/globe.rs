//! Treasure-hunter data on a ball or a cylinder.
//!
//! Points are drawn either inside the unit ball, `p = (1 - d) u` with `u`
//! uniform on the sphere, or in a stack of unit disks, `p = (x, y, -d)`.
//! The supervised concepts are surface distances to the poles `y = +1` and
//! `y = -1`; the unsupervised concept is the depth `d`. The label says
//! whether the point lies within `radius` of `(1, 0, 0)`.
//!
//! On the ball, both pole distances shrink with depth, so depth couples the
//! two supervised concepts; on the cylinder it does not.

use std::f64::consts::PI;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

const TAG_PHI: u64 = 0x676c_6f62_6570_6869;
const TAG_POINTS: u64 = 0x676c_6f62_6570_7473;
const TAG_NOISE: u64 = 0x676c_6f62_656e_6f69;

/// Reference point of the task.
pub const REFERENCE: [f64; 3] = [1.0, 0.0, 0.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Geometry {
    Spherical,
    Cylindrical,
}

impl Geometry {
    pub fn as_str(self) -> &'static str {
        match self {
            Geometry::Spherical => "sphere",
            Geometry::Cylindrical => "cylinder",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobeConfig {
    pub geometry: Geometry,
    pub n: usize,
    /// Activation dimension.
    pub r: usize,
    /// Standard deviation of the activation noise.
    pub sigma_a: f64,
    /// Search radius around the reference point.
    pub radius: f64,
    pub seed: u64,
}

impl Default for GlobeConfig {
    fn default() -> Self {
        GlobeConfig {
            geometry: Geometry::Spherical,
            n: 8000,
            r: 64,
            sigma_a: 0.3,
            radius: 0.75,
            seed: 0,
        }
    }
}

/// Draws one location.
///
/// Directions on the sphere come from normalised 3-D Gaussians; disk points
/// use the square-root radius method.
pub fn sample_point(geometry: Geometry, rng: &mut RngStream) -> [f64; 3] {
    match geometry {
        Geometry::Spherical => {
            let mut u = [0.0; 3];
            let norm = loop {
                rng.fill_normal(&mut u);
                let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                if norm > 0.0 {
                    break norm;
                }
            };
            let d = rng.uniform();
            let rho = 1.0 - d;
            [rho * u[0] / norm, rho * u[1] / norm, rho * u[2] / norm]
        }
        Geometry::Cylindrical => {
            let rad = rng.uniform().sqrt();
            let theta = 2.0 * PI * rng.uniform();
            let d = rng.uniform();
            [rad * theta.cos(), rad * theta.sin(), -d]
        }
    }
}

/// `(C1, C2, C3)`: distance to the north pole, distance to the south pole,
/// depth.
pub fn concepts(geometry: Geometry, p: [f64; 3]) -> Result<[f64; 3]> {
    match geometry {
        Geometry::Spherical => {
            let rho = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if rho == 0.0 {
                return Err(Error::DegeneratePoint);
            }
            let uy = (p[1] / rho).clamp(-1.0, 1.0);
            Ok([rho * uy.acos(), rho * (-uy).acos(), 1.0 - rho])
        }
        Geometry::Cylindrical => {
            let (x, y) = (p[0], p[1]);
            Ok([
                (x * x + (y - 1.0) * (y - 1.0)).sqrt(),
                (x * x + (y + 1.0) * (y + 1.0)).sqrt(),
                -p[2],
            ])
        }
    }
}

/// 1 if `p` lies strictly within `radius` of the reference point.
pub fn label(p: [f64; 3], radius: f64) -> u8 {
    let d2: f64 = p
        .iter()
        .zip(REFERENCE)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (d2.sqrt() < radius) as u8
}

#[derive(Clone, Debug)]
pub struct GlobeData {
    /// Concept columns `(C1, C2, C3)`; `known` is `[0, 1]`.
    pub dataset: Dataset,
    pub points: Vec<[f64; 3]>,
    /// Concept-to-activation map, `r x 3`.
    pub phi: Matrix,
}

pub fn generate_globe_dataset(cfg: &GlobeConfig) -> Result<GlobeData> {
    if cfg.n == 0 || cfg.r == 0 {
        return Err(Error::InvalidArgument(
            "globe data needs n >= 1 and r >= 1".into(),
        ));
    }
    if !(cfg.radius > 0.0) || !(cfg.sigma_a >= 0.0) {
        return Err(Error::InvalidArgument(
            "globe radius must be positive and sigma_a non-negative".into(),
        ));
    }
    let phi = RngStream::substream(cfg.seed, TAG_PHI).normal_matrix(cfg.r, 3, 1.0);
    let mut point_rng = RngStream::substream(cfg.seed, TAG_POINTS);
    let mut points = Vec::with_capacity(cfg.n);
    let mut c = Matrix::zeros(cfg.n, 3);
    let mut labels = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let p = sample_point(cfg.geometry, &mut point_rng);
        c.row_mut(i).copy_from_slice(&concepts(cfg.geometry, p)?);
        labels.push(label(p, cfg.radius));
        points.push(p);
    }
    let mut a = c.matmul_transposed(&phi)?;
    let mut noise_rng = RngStream::substream(cfg.seed, TAG_NOISE);
    for v in a.as_mut_slice() {
        *v += cfg.sigma_a * noise_rng.normal();
    }
    Ok(GlobeData {
        dataset: Dataset::new(a, c, vec![0, 1], labels)?,
        points,
        phi,
    })
}
