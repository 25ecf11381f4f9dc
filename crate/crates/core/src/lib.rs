//! Exact dense measures on the discrete cube and its slices, influence
//! matrices, sparse Ky Fan geometry, the pinning localization martingale,
//! and the fixed-size independent-set localization chain.

pub mod error;
pub mod indep;
pub mod influence;
pub mod linalg;
pub mod localization;
pub mod measure;
pub mod seed;
pub mod sparse;

pub use error::{Error, Result};
pub use measure::{CubeMeasure, PinVector, SliceMeasure, TiltVector};
