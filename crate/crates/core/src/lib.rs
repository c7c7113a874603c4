//! Quantization on compact flat manifolds: heat kernels on Euclidean space
//! forms, the weighted and holomorphic Hilbert spaces with the transform
//! between them, reproducing-kernel operator calculus, time-sliced holomorphic
//! propagators, and the almost-complex structure on the cotangent bundle.

pub mod error;
pub mod fourier;
pub mod geometry;
pub mod heatkernel;
pub mod hilbert;
pub mod lattice;
pub mod propagator;
pub mod quadrature;
pub mod spaceform;

pub use error::{Error, Result};
pub use fourier::{FourierFunction, HolomorphicFunction, C64};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
