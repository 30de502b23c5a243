//! Numerical laboratory for rotationally equivariant wave maps from a
//! surface of revolution to the round sphere.
//!
//! * [`geometry`]: profiles, geodesics, comparison triangles.
//! * [`stationary`]: minimizers of the reduced action (rotating solutions).
//! * [`evolution`]: the equivariant Cauchy problem as a constrained 1+1 wave equation.
//! * [`diagnostics`]: conserved quantities, cone fluxes, orbital distance.
//! * [`regularity`]: operator identities behind higher regularity.
//!
//! Everything numerical is generic over [`Real`]; the `*64` aliases below fix
//! the scalar to `f64`, which is what the CLI uses.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod io;
pub mod numeric;
pub mod regularity;
mod scalar;
pub mod stationary;

pub use error::{Error, Result};
pub use scalar::{Real, Vec3};

pub type SurfaceProfile64 = geometry::SurfaceProfile<f64>;
pub type TargetProfile64 = geometry::TargetProfile<f64>;
pub type GeodesicTriangle64 = geometry::GeodesicTriangle<f64>;
pub type StationarySolution64 = stationary::StationarySolution<f64>;
pub type FieldState64 = evolution::FieldState<f64>;
pub type DiagnosticsRecord64 = diagnostics::DiagnosticsRecord<f64>;
