//! Standalone small-divisor kernels: block-parametrix inversion of
//! diagonal-plus-Toeplitz operators, quantitative Weierstrass preparation,
//! resultant elimination, and sublevel-set measure bounds.

pub mod coupling;
pub mod excision;
pub mod resultant;
pub mod weierstrass;

pub use coupling::{build_cover, coupling_invert, Block, BlockCover, CouplingResult};
pub use excision::{excision_bound, excision_measure, Excisable, ExcisionResult, Polynomial};
pub use resultant::{resultant_ominus, verify_resultant_identity, IdentityDefect, ResultantTriple};
pub use weierstrass::{weierstrass_prepare, PreparationResult, Preparable, PreparationSettings};
