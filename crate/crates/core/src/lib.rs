//! Coupled quantum-classical dynamics of a hydrogen atom in a strong,
//! linearly polarized laser pulse beyond the dipole approximation.
//!
//! The electron (relative coordinate) is propagated on a 3D grid; the
//! center of mass follows classical Hamilton equations whose force comes
//! from electron expectation values.

pub mod angular;
pub mod banded;
pub mod checkpoint;
pub mod error;
pub mod grid;
pub mod hydrogen;
pub mod laser;
pub mod observables;
pub mod potentials;
pub mod propagator;
pub mod quadrature;
pub mod radial;
#[cfg(any(test, feature = "testing"))]
#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
pub use grid::{build_grid, DvrGrid, GridSpec, Wavefunction};
pub use laser::{LaserPulse, PhysicalConstants};
