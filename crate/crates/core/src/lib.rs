//! Discretization and solver for the HcscK moment-map system on compact
//! Riemann surfaces.

pub mod analytic;
pub mod continuity;
pub mod error;
pub mod field;
pub mod holomorphic;
pub mod linalg;
pub mod mobius;
pub mod newton;
pub mod moment_maps;
pub mod operators;
pub mod par;
pub mod sparse;
pub mod surface;
pub mod verification;

#[cfg(test)]
mod invariants;

pub use error::{HcscError, Result};
pub use field::{SectionField, Weight};
pub use surface::{build_surface, SurfaceKind, SurfaceModel};
