//! Two-point correlation dynamics of the periodic XX spin chain under local
//! on-site dephasing.
//!
//! The correlation matrix obeys a closed linear evolution equation. Three
//! independent pipelines solve it:
//!
//! * [`ed_oracle`] — brute-force reference solvers: direct integration of the
//!   real-space matrix ODE and spectral/exponential evolution of the reduced
//!   momentum-mode generator. Ground truth for everything else.
//! * [`transfer`] + [`laplace`] — closed-form resolvent elements of the mode
//!   generator built from 2×2 transfer matrices, inverted numerically back to
//!   the time domain.
//! * [`thermo`] — thermodynamic-limit kernels and closed-form short/long time
//!   asymptotics (squared Bessel, diffusion kernel, off-diagonal decay laws).
//!
//! [`observables`] extracts magnetization/current profiles, the transferred
//! magnetization and its running exponent, and diffusion/power-law fits.

pub mod ed_oracle;
pub mod error;
pub mod laplace;
pub mod model;
pub mod numeric;
pub mod observables;
pub mod pipeline;
pub mod thermo;
pub mod transfer;

pub use error::Error;
pub use model::{ChainParams, CorrelationMatrix, DiagonalInitialState, MomentumMode};

/// Convenience alias used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
