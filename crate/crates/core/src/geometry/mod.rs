//! Domain geometry: profiles, geodesics and comparison triangles.

mod comparison;
mod geodesic;
mod profile;

pub use comparison::{
    angle_identities_check, comparison_angles, comparison_distances, comparison_sweep, cone_angle, curvature_range, eikonal_residual,
    lightcone_kernel_integral, lightcone_kernel_integral_with, Bracket, Comparison, ComparisonAngles, ComparisonSweep, IdentityOptions,
    IdentityReport,
};
pub use geodesic::{geodesic_distance, geodesic_distance_with, geodesic_trace, GeodesicPath, GeodesicTriangle, ShootingOptions};
pub use profile::{validate_profile, Jet, ProfileCheck, ProfileKind, SurfaceProfile, TargetKind, TargetProfile, ValidationReport};
