//! Numerical laboratory for the Vlasov-Nordström-Fokker-Planck system.
//!
//! The crate solves the spatially homogeneous system and its self-similar
//! rescaling on radial or line momentum grids, a reduced 1x+1p perturbation
//! system coupled to a scalar wave equation, and evaluates weighted energy and
//! dissipation functionals on the resulting states.

pub mod deriv;
pub mod diffusion;
pub mod drift;
pub mod energy;
pub mod error;
pub mod grid;
pub mod homogeneous;
pub mod interp;
pub mod par;
pub mod perturbation;
pub mod reference;
pub mod relkin;
pub mod selfsimilar;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{GridKind, MomentumGrid, SpaceGrid};
pub use par::Execution;
