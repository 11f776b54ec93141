//! Deterministic image-processing kernels for cardiac MRI segmentation
//! pipelines: slice preprocessing, stacked augmentation, reconstruction-loss
//! numerics, connected-component postprocessing, and Dice/Hausdorff
//! evaluation.
//!
//! All kernels are pure functions over immutable values and are generic over
//! the scalar type via [`Real`]; `f64` is the scalar used by the CLI
//! pipeline, with `f32` available through the same APIs. Randomness is
//! confined to explicit seeded streams ([`grid::SeedSpec`]), so every result
//! is reproducible bit-for-bit regardless of execution order or thread
//! count.

pub mod augment;
pub mod error;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod postprocess;
pub mod preprocess;

mod real;

pub use error::{Error, Result};
pub use real::Real;

/// Concrete aliases for the common scalar choices. The CLI pipeline uses the
/// `f64` variants throughout.
pub type ImageF32 = grid::Image2D<f32>;
pub type ImageF64 = grid::Image2D<f64>;
pub type PairF32 = grid::SlicePair<f32>;
pub type PairF64 = grid::SlicePair<f64>;
pub type GridF32 = losses::RealGrid<f32>;
pub type GridF64 = losses::RealGrid<f64>;
pub type AffineF32 = grid::Affine2D<f32>;
pub type AffineF64 = grid::Affine2D<f64>;
