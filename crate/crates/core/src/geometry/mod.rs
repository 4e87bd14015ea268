//! Base domain, lattice, distance field and the families x ↦ Ω(x).

mod domain;
mod family;
mod grid;
mod validate;

pub use domain::{
    point_in_polygon, polygon_area, polygon_boundary_distance, polygon_is_simple, quadrature_directions,
    segment_distance, sphere_measure, unit_ball_volume, DomainSpec, Point,
};
pub use family::{segment_inside, Cone, DomainFamily, FamilyRule, RhoLaw, SigmaKind, SigmaSpec, TimeDependence};
pub use grid::{build_grid, Grid};
pub use validate::{
    annulus_density, density_certificate, validate_family, DensityCertificate, ValidationOptions, ValidationReport,
    ValidationRow,
};
