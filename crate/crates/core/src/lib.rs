//! Numerical geometry of closed sets in R^n: nearest-point projections,
//! distance bundles, polyhedral cones, and the strata of points touched by
//! balls from many independent directions.
//!
//! The modules are layered bottom-up:
//!
//! * [`kernel`]: small dense linear algebra (vectors, flats, ranks).
//! * [`sets`]: closed sets with exact distance / projection oracles.
//! * [`cones`]: polyhedral cones, polars, cone-control constants.
//! * [`bundle`]: distance-bundle membership and sampling.
//! * [`verify`]: residual checks of the quantitative estimates.
//! * [`stratify`]: strata, projection covers, slab and patch covers.

pub mod bundle;
pub mod cones;
mod dd;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod par;
pub mod rng;
pub mod sets;
pub mod stratify;
pub mod verify;

pub use error::{GeomError, Result};
pub use kernel::{AffineFlat, Subspace, Vector};
pub use par::Execution;
pub use sets::ClosedSet;
