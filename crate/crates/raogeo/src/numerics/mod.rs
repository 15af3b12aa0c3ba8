//! Low-level numeric machinery: quadrature, finite differences, seeded
//! random streams, and small symmetric-matrix helpers.

pub mod diff;
pub mod linalg;
pub mod quad;
pub mod rng;
pub mod special;
