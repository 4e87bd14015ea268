//! Singular-kernel quadrature and assembly of `A = diag(h) + L`.

mod assembly;
mod coefficients;
mod params;

pub use assembly::{assemble, assemble_weights, kernel_weights, localize, DiscreteOperator, TailRule};
pub use coefficients::{
    box_exterior_integral, fractional_laplacian_zero_ext, interval_difference_integral, killing_at, killing_term,
    killing_term_with, kinetic_at, kinetic_coefficient, kinetic_coefficient_with, radial_power_integral,
    shell_factor, DEFAULT_DIRECTIONS, SHELL_CELLS,
};
pub use params::{CoefficientProfile, FracParams, GridFunction, ProfileKind};
