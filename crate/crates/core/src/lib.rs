//! Multi-phase travelling waves `x_n(t) = n·b + χ(ωn − gγt)` in nonlinear
//! chains `ẍ_n = F(x_{n−1} − x_n) − F(x_n − x_{n+1})`.
//!
//! The crate is organised bottom-up:
//!
//! * [`spaces`]: weighted ℓ¹ sequences on `Z^ν`, convolution, operator norms
//! * [`forcelaw`]: analytic force laws and the nonlinear Fourier map `W`
//! * [`spectral`]: linear dispersion data, divisors `V`, the `Λ` and `Ω` matrices
//! * [`reduction`]: kernel/complement split, residual functionals, profiles
//! * [`solver`]: Newton iteration for the complement equation, the frequency
//!   solve `ω(a)`, sweeps and second-order checks
//! * [`smalldiv`]: standalone small-divisor kernels (block inversion,
//!   Weierstrass preparation, resultants, sublevel-set bounds)
//! * [`dynamics`]: direct integration of the chain to verify waves
//! * [`cli`]: the `phasewave` command-line tool

#[cfg(feature = "cli")]
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod forcelaw;
pub mod reduction;
pub mod smalldiv;
pub mod solver;
pub mod spaces;
pub mod spectral;

pub use error::{Error, Result};
pub use forcelaw::{ForceLaw, LawKind};
pub use spaces::{FourierSequence, LatticeOperator, ModeIndex, WeightFamily, WeightSpec};
pub use spectral::DispersionData;
pub use solver::{SolverConfig, TruncationSpec, WaveSolution};
