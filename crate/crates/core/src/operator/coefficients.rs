use std::f64::consts::PI;

use quadrature::double_exponential;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::{quadrature_directions, sphere_measure, DomainSpec, Grid, Point, SigmaSpec};

use super::params::{FracParams, GridFunction};

/// Angular samples used for ray quadratures in 2D.
pub const DEFAULT_DIRECTIONS: usize = 2048;

/// Half-width, in cells, of the box whose lattice nodes form the singular shell.
pub const SHELL_CELLS: i64 = 2;

/// `∫_a^b r^{-1-2s} dr`, with `b = ∞` allowed.
pub fn radial_power_integral(a: f64, b: f64, s: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let tail = if b.is_finite() { b.powf(-2.0 * s) } else { 0.0 };
    (a.powf(-2.0 * s) - tail) / (2.0 * s)
}

/// `∫` of `r^{-1-2s}` over `outer ∖ inner`, both given as sorted disjoint
/// half-open intervals. `inner` must cover a neighbourhood of 0 whenever
/// `outer` touches it.
pub fn interval_difference_integral(outer: &[(f64, f64)], inner: &[(f64, f64)], s: f64) -> f64 {
    let mut total = 0.0;
    for &(a, b) in outer {
        let mut cur = a;
        for &(c, d) in inner {
            if d <= cur || c >= b {
                continue;
            }
            if c > cur {
                total += radial_power_integral(cur, c.min(b), s);
            }
            cur = cur.max(d);
            if cur >= b {
                break;
            }
        }
        if cur < b {
            total += radial_power_integral(cur, b, s);
        }
    }
    total
}

/// Truncation radius for exterior integrals.
fn far_radius(domain: &DomainSpec) -> f64 {
    10.0 * domain.diameter()
}

/// `k(x)` at an arbitrary point of Ω: complement intervals along each ray are
/// integrated in closed form up to `R = 10 diam(Ω)`, and the tail
/// `ω_N R^{-2s}/(2s)` is added analytically.
pub fn killing_at(domain: &DomainSpec, x: Point, s: f64, directions: usize) -> f64 {
    let dim = domain.dim();
    let r_far = far_radius(domain);
    let mut total = 0.0;
    for (dir, w) in quadrature_directions(dim, directions) {
        let inside = domain.ray_inside_intervals(x, dir);
        let mut prev = 0.0;
        let mut acc = 0.0;
        for (t0, t1) in inside {
            acc += radial_power_integral(prev, t0.min(r_far), s);
            prev = t1;
        }
        acc += radial_power_integral(prev, r_far, s);
        total += w * acc;
    }
    total + sphere_measure(dim) * r_far.powf(-2.0 * s) / (2.0 * s)
}

/// Killing term on every grid node (zero off the interior).
pub fn killing_term(grid: &Grid, params: FracParams) -> GridFunction {
    killing_term_with(grid, params, DEFAULT_DIRECTIONS)
}

pub fn killing_term_with(grid: &Grid, params: FracParams, directions: usize) -> GridFunction {
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            if grid.is_interior(k) {
                killing_at(grid.domain(), grid.coord(k), params.s(), directions)
            } else {
                0.0
            }
        })
        .collect();
    GridFunction::from_values(values)
}

/// `Γ(2s) Σ_σ w_σ d(x, σ)^{-2s}` with `d(x, σ)` the first exit distance along σ.
pub fn kinetic_at(domain: &DomainSpec, x: Point, s: f64, directions: usize) -> Result<f64> {
    let mut total = 0.0;
    for (dir, w) in quadrature_directions(domain.dim(), directions) {
        let t = domain
            .first_exit(x, dir)
            .filter(|t| *t > 0.0 && t.is_finite())
            .ok_or_else(|| Error::Geometry(format!("ray cast from ({}, {}) found no exit", x.x, x.y)))?;
        total += w * t.powf(-2.0 * s);
    }
    Ok(gamma(2.0 * s) * total)
}

/// Kinetic coefficient `a(x)` on every grid node (zero off the interior).
pub fn kinetic_coefficient(grid: &Grid, params: FracParams) -> Result<GridFunction> {
    kinetic_coefficient_with(grid, params, DEFAULT_DIRECTIONS)
}

pub fn kinetic_coefficient_with(grid: &Grid, params: FracParams, directions: usize) -> Result<GridFunction> {
    let values: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            if grid.is_interior(k) {
                kinetic_at(grid.domain(), grid.coord(k), params.s(), directions)
            } else {
                Ok(0.0)
            }
        })
        .collect();
    Ok(GridFunction::from_values(values?))
}

/// Ratio between the exact `|z|^{2-N-2s}` moment of the box
/// `[-(K+½)Δx, (K+½)Δx]^N ∩ Σ` and the same moment summed over the lattice
/// nodes of that box (K = [`SHELL_CELLS`]). Shell weights are scaled by this
/// factor, so the shell reproduces the second moment of the cells it covers.
/// Independent of Δx.
pub fn shell_factor(sigma: &SigmaSpec, dim: usize, s: f64) -> f64 {
    let half = SHELL_CELLS as f64 + 0.5;
    let p = 2.0 - 2.0 * s;
    if dim == 1 {
        let exact = 2.0 * half.powf(p) / p;
        let lattice: f64 = (1..=SHELL_CELLS).map(|k| 2.0 * (k as f64).powf(1.0 - 2.0 * s)).sum();
        return exact / lattice;
    }
    let radial = |th: f64| {
        let r = half / th.cos().abs().max(th.sin().abs());
        r.powf(p) / p
    };
    let mut cuts: Vec<f64> = (0..=8).map(|k| k as f64 * PI / 4.0).collect();
    cuts.extend(sigma.angle_breakpoints());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut exact = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-15 || !sigma.contains(Point::from_angle(0.5 * (a + b)), 2) {
            continue;
        }
        exact += double_exponential::integrate(radial, a, b, 1e-14).integral;
    }
    let mut lattice = 0.0;
    for j in -SHELL_CELLS..=SHELL_CELLS {
        for i in -SHELL_CELLS..=SHELL_CELLS {
            let z = Point::new(i as f64, j as f64);
            if sigma.contains(z, 2) {
                lattice += z.norm().powf(-2.0 * s);
            }
        }
    }
    if lattice == 0.0 {
        1.0
    } else {
        exact / lattice
    }
}

/// `∫_{|z|_∞ > b} |z|^{-N-2s} dz`.
pub fn box_exterior_integral(b: f64, dim: usize, s: f64) -> f64 {
    if dim == 1 {
        return 2.0 * b.powf(-2.0 * s) / (2.0 * s);
    }
    let f = |th: f64| (b / th.cos()).powf(-2.0 * s) / (2.0 * s);
    8.0 * double_exponential::integrate(f, 0.0, PI / 4.0, 1e-15).integral
}

/// Standard fractional Laplacian `p.v.∫_{ℝ^N} (φ(x) − φ(y)) |x−y|^{-N-2s} dy`
/// of a function already extended by zero, by a lattice sum through `x` over
/// the box of `reach` cells (shell handled as in the operator) plus the exact
/// exterior of that box.
pub fn fractional_laplacian_zero_ext(
    phi: impl Fn(Point) -> f64,
    x: Point,
    dx: f64,
    dim: usize,
    params: FracParams,
    reach: i64,
) -> f64 {
    let s = params.s();
    let expo = params.kernel_exponent(dim);
    let gamma_shell = shell_factor(&SigmaSpec::full_space(), dim, s);
    let vol = dx.powi(dim as i32);
    let phi_x = phi(x);
    let mut total = 0.0;
    let jr = if dim == 1 { 0 } else { reach };
    for j in -jr..=jr {
        for i in -reach..=reach {
            if i == 0 && j == 0 {
                continue;
            }
            let z = Point::new(i as f64 * dx, j as f64 * dx);
            let mut w = vol * z.norm().powf(-expo);
            if i.abs().max(j.abs()) <= SHELL_CELLS {
                w *= gamma_shell;
            }
            total += w * (phi_x - phi(x + z));
        }
    }
    total + phi_x * box_exterior_integral((reach as f64 + 0.5) * dx, dim, s)
}
