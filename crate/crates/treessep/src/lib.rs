//! Exclusion-process toolkit for regular trees: exact transition kernels of
//! the dual walks, Green and resolvent integrals, occupation-time statistics,
//! moderate-deviation rate functions, and an event-driven stirring simulator
//! with exponential tilting for rare-event estimation.

pub mod dual;
pub mod error;
pub mod exact;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod potential;
pub mod quad;
pub mod rate;
pub mod scalar;
pub mod ssep;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete scalar used by the simulation lane.
pub type Real = f64;

/// Radial kernel at the simulation scalar type.
pub type RealRadialKernel = kernel::RadialKernel<Real>;
/// Green table at the simulation scalar type.
pub type RealGreenTable = potential::GreenTable<Real>;
/// Resolvent field at the simulation scalar type.
pub type RealResolventField = potential::ResolventField<Real>;
/// Covariance matrix at the simulation scalar type.
pub type RealCovarianceMatrix = potential::CovarianceMatrix<Real>;
