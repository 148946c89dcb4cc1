//! Manifold-aware data generation that fills sparse regions of a point cloud
//! until its sampling density is roughly uniform.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod generation;
pub mod kernel;
pub mod mgc;
pub mod pipeline;
pub mod spectral;

pub use dataset::{DataMatrix, LabeledDataset};
pub use error::{Result, SugarError};
pub use kernel::BandwidthSpec;
pub use pipeline::{sugar, sugar_iterate, sugar_iterate_with, AugmentedDataset, KsProbe, SugarConfig};
