//! Data generators with known ground truth.

pub mod globe;
pub mod synthetic;

pub use globe::{generate_globe_dataset, Geometry, GlobeConfig, GlobeData};
pub use synthetic::{
    build_b, build_m, build_task_weights, generate_from_structure, generate_synthetic_dataset,
    pair_assignment, sample_spd, CovarianceBlocks, SyntheticConfig, SyntheticData,
    SyntheticStructure, TaskWeights,
};
