//! Numerical laboratory for heat semigroups on finite model metric measure spaces.
//!
//! The crate builds discretized weighted intervals, circles and the
//! Ornstein–Uhlenbeck reference space, realizes their Markov generators and
//! heat kernels spectrally, and evaluates both sides of the dimension-free
//! Harnack family of inequalities together with the Gamma-calculus,
//! optimal-transport and functional-inequality quantities around them.
//!
//! Modules are layered bottom-up:
//!
//! - [`space`]: model spaces, geodesic curves, metric slope, intrinsic metric
//!   and the closed-form Mehler oracle.
//! - [`operator`]: generators, spectral heat operators, carré du champ,
//!   `Γ₂`, Bakry–Émery constants and `p→q` operator norms.
//! - [`transport`]: densities, exact Wasserstein distances, relative entropy
//!   and displacement interpolation.
//! - [`inequalities`]: the checkers, each producing a [`CheckReport`].
//! - [`proof_replay`]: a step-by-step numerical trace of the interpolation
//!   argument behind the Harnack inequality.

pub mod error;
pub mod inequalities;
pub mod operator;
pub mod proof_replay;
pub mod quadrature;
pub mod space;
pub mod transport;

pub use error::{Error, Result};
pub use inequalities::{CheckReport, Model, ToleranceModel};
pub use operator::{Generator, GridFunction, HeatOperator, SpectralDecomposition};
pub use space::{ModelKind, ModelSpace, ModelSpec};
pub use transport::{Coupling, DensityMeasure};
