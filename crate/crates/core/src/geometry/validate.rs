use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};

use super::domain::{DomainSpec, Point};
use super::family::DomainFamily;
use super::grid::Grid;

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationRow {
    pub node: Option<usize>,
    pub coord: Option<Point>,
    pub check: String,
    pub pass: bool,
    pub value: f64,
}

/// Outcome of [`validate_family`]. Violations are rows, not errors.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ValidationRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn rows_for<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a ValidationRow> + 'a {
        self.rows.iter().filter(move |r| r.check == check)
    }

    /// Delimited text: `node,x,y,check,pass,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,x,y,check,pass,value")?;
        for r in &self.rows {
            let node = r.node.map(|n| n.to_string()).unwrap_or_default();
            let (x, y) = r
                .coord
                .map(|p| (format!("{:.12e}", p.x), format!("{:.12e}", p.y)))
                .unwrap_or_default();
            writeln!(w, "{node},{x},{y},{},{},{:.12e}", r.check, r.pass, r.value)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ValidationOptions {
    /// Number of centers used for the symmetric-difference continuity probe.
    pub continuity_samples: usize,
    /// Extra times at which a time-dependent family is checked.
    pub times: Vec<f64>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            continuity_samples: 12,
            times: Vec::new(),
        }
    }
}

/// Checks the structural assumptions on x ↦ Ω(x): locality against Σ inside
/// B_{ζ d(x)}, point symmetry and annular density of Σ, and the decay of
/// |Ω(y) △ Ω(x)| as y → x.
pub fn validate_family(family: &DomainFamily, grid: &Grid, opts: &ValidationOptions) -> ValidationReport {
    let mut rows = Vec::new();
    let mut times: Vec<Option<f64>> = vec![None];
    if family.is_time_dependent() {
        times.extend(opts.times.iter().map(|t| Some(*t)));
    }
    for t in &times {
        let name = match t {
            None => "locality".to_string(),
            Some(t) => format!("locality@t={t}"),
        };
        for &x in grid.interior() {
            let mismatches = locality_mismatches(family, grid, x, *t);
            rows.push(ValidationRow {
                node: Some(x),
                coord: Some(grid.coord(x)),
                check: name.clone(),
                pass: mismatches == 0,
                value: mismatches as f64,
            });
        }
    }
    sigma_rows(family, grid, &mut rows);
    continuity_rows(family, grid, opts.continuity_samples, &mut rows);
    ValidationReport { rows }
}

/// Count of sampled points z with |z| <= ζ d(x) where membership in Ω(x)
/// disagrees with membership of y - x in Σ.
fn locality_mismatches(family: &DomainFamily, grid: &Grid, x: usize, t: Option<f64>) -> usize {
    let dim = grid.dim();
    let xp = grid.coord(x);
    let r = family.zeta * grid.dist(x);
    let mut bad = 0;
    let reach = (r / grid.dx()).floor() as i64;
    let dj_range = if dim == 1 { 0..=0 } else { -reach..=reach };
    for dj in dj_range {
        for di in -reach..=reach {
            if di == 0 && dj == 0 {
                continue;
            }
            let Some(y) = grid.offset(x, di, dj) else { continue };
            let z = grid.coord(y) - xp;
            if z.norm() > r {
                continue;
            }
            if family.membership(grid, x, y, t) != family.sigma.contains(z, dim) {
                bad += 1;
            }
        }
    }
    // off-lattice samples reach the edge of the locality ball
    for (dir, _) in super::domain::quadrature_directions(dim, 16) {
        for frac in [0.25, 0.5, 0.75, 1.0] {
            let z = dir * (frac * r);
            if z.norm() == 0.0 {
                continue;
            }
            if family.contains_point(grid, xp, xp + z, t) != family.sigma.contains(z, dim) {
                bad += 1;
            }
        }
    }
    bad
}

fn sigma_rows(family: &DomainFamily, grid: &Grid, rows: &mut Vec<ValidationRow>) {
    let dim = grid.dim();
    let sigma = &family.sigma;
    // point symmetry, including directions on the cone edges
    let mut angles: Vec<f64> = (0..720).map(|k| k as f64 * PI / 360.0).collect();
    angles.extend(sigma.angle_breakpoints());
    let asym = angles
        .iter()
        .filter(|a| {
            let z = Point::from_angle(**a);
            let z = if dim == 1 { Point::on_line(z.x.signum()) } else { z };
            sigma.contains(z, dim) != sigma.contains(-z, dim)
        })
        .count();
    rows.push(ValidationRow {
        node: None,
        coord: None,
        check: "sigma_symmetry".into(),
        pass: asym == 0,
        value: asym as f64,
    });
    let diam = grid.domain().diameter();
    for scale in [1e-3, 1e-2, 1e-1, 1.0] {
        let r = scale * diam;
        let density = annulus_density(|z| sigma.contains(z, dim), r, dim);
        rows.push(ValidationRow {
            node: None,
            coord: Some(Point::on_line(r)),
            check: "sigma_density".into(),
            pass: density >= sigma.q - 1e-12,
            value: density,
        });
    }
}

/// Area-uniform deterministic sampling of B_{2r} \ B_r.
pub fn annulus_density(member: impl Fn(Point) -> bool, r: f64, dim: usize) -> f64 {
    if dim == 1 {
        let hits = [1.5 * r, -1.5 * r].iter().filter(|z| member(Point::on_line(**z))).count();
        return hits as f64 / 2.0;
    }
    let (nr, na) = (32, 512);
    let mut hits = 0usize;
    for i in 0..nr {
        // uniform in r^2 between r^2 and 4 r^2
        let rr = (r * r * (1.0 + 3.0 * (i as f64 + 0.5) / nr as f64)).sqrt();
        for k in 0..na {
            let th = 2.0 * PI * (k as f64 + 0.5) / na as f64;
            if member(Point::from_angle(th) * rr) {
                hits += 1;
            }
        }
    }
    hits as f64 / (nr * na) as f64
}

fn continuity_rows(family: &DomainFamily, grid: &Grid, samples: usize, rows: &mut Vec<ValidationRow>) {
    let interior = grid.interior();
    if samples == 0 {
        return;
    }
    let stride = (interior.len() / samples).max(1);
    let dx = grid.dx();
    let spacing = dx / 2.0;
    let (lo, hi) = grid.domain().bounding_box();
    let dim = grid.dim();
    let probes: Vec<Point> = {
        let nx = ((hi.x - lo.x) / spacing).ceil() as usize;
        let ny = if dim == 1 { 1 } else { ((hi.y - lo.y) / spacing).ceil() as usize };
        let mut v = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let p = Point::new(
                    lo.x + (i as f64 + 0.371) * spacing,
                    if dim == 1 { 0.0 } else { lo.y + (j as f64 + 0.619) * spacing },
                );
                if grid.domain().contains(p) {
                    v.push(p);
                }
            }
        }
        v
    };
    let cell = spacing.powi(dim as i32);
    for &x in interior.iter().step_by(stride).take(samples) {
        let xp = grid.coord(x);
        let shifted = |delta: f64| -> Option<Point> {
            [Point::on_line(delta), Point::on_line(-delta)]
                .into_iter()
                .map(|e| xp + e)
                .find(|p| grid.domain().contains(*p))
        };
        let symdiff = |y: Point| -> f64 {
            probes
                .iter()
                .filter(|p| family.contains_point(grid, xp, **p, None) != family.contains_point(grid, y, **p, None))
                .count() as f64
                * cell
        };
        let (Some(y_far), Some(y_near)) = (shifted(dx), shifted(dx / 4.0)) else {
            continue;
        };
        let v_far = symdiff(y_far);
        let v_near = symdiff(y_near);
        rows.push(ValidationRow {
            node: Some(x),
            coord: Some(xp),
            check: "continuity_dx".into(),
            pass: true,
            value: v_far,
        });
        rows.push(ValidationRow {
            node: Some(x),
            coord: Some(xp),
            check: "continuity_quarter_dx".into(),
            pass: v_near <= v_far + cell,
            value: v_near,
        });
    }
}

/// Exterior density constants of ∂Ω.
#[derive(Clone, Debug)]
pub struct DensityCertificate {
    pub rho0: f64,
    pub kappa: f64,
    /// `(boundary sample, ρ, |B_ρ ∩ Ω^c| / |B_ρ|)`.
    pub ratios: Vec<(Point, f64, f64)>,
}

/// Measures `|B_ρ(x̄) ∩ Ω^c| / |B_ρ(x̄)|` over boundary samples x̄ and dyadic
/// radii ρ = ρ₀ 2^{-k}; κ is the minimum. Exact in 1D, polar midpoint
/// quadrature in 2D.
pub fn density_certificate(domain: &DomainSpec, rho0: f64, samples: usize) -> Result<DensityCertificate> {
    if !(rho0.is_finite() && rho0 > 0.0) {
        return Err(Error::config_key("rho0", format!("radius {rho0} must be positive")));
    }
    if samples == 0 {
        return Err(Error::config_key("samples", "need at least one boundary sample"));
    }
    let pts = domain.boundary_samples(samples);
    if pts.is_empty() {
        return Err(Error::config("degenerate boundary sampling"));
    }
    let mut ratios = Vec::new();
    for p in pts {
        for k in 0..6 {
            let rho = rho0 * 0.5f64.powi(k);
            ratios.push((p, rho, exterior_fraction(domain, p, rho)));
        }
    }
    let kappa = ratios.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    Ok(DensityCertificate { rho0, kappa, ratios })
}

fn exterior_fraction(domain: &DomainSpec, center: Point, rho: f64) -> f64 {
    if domain.dim() == 1 {
        let (lo, hi) = domain.bounding_box();
        let (a, b) = (center.x - rho, center.x + rho);
        let overlap = (b.min(hi.x) - a.max(lo.x)).max(0.0);
        return (2.0 * rho - overlap) / (2.0 * rho);
    }
    let (nr, na) = (48, 384);
    let mut outside = 0usize;
    for i in 0..nr {
        let r = rho * ((i as f64 + 0.5) / nr as f64).sqrt();
        for k in 0..na {
            let th = 2.0 * PI * (k as f64 + 0.5) / na as f64;
            if !domain.contains(center + Point::from_angle(th) * r) {
                outside += 1;
            }
        }
    }
    outside as f64 / (nr * na) as f64
}
