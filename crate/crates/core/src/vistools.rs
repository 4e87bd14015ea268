//! Sup/inf-convolutions of sampled functions by brute-force maximization.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::operator::GridFunction;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionResult {
    pub values: GridFunction,
    /// Maximizing (resp. minimizing) node for every node, lowest index on ties.
    pub argopt: Vec<usize>,
    pub eps: f64,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::config_key("eps", format!("convolution parameter {eps} must be positive")))
    }
}

/// `u^ε(x) = max_y [u(y) − |x − y|² / ε]` over all grid nodes.
pub fn sup_convolve(grid: &Grid, u: &GridFunction, eps: f64) -> Result<ConvolutionResult> {
    check_eps(eps)?;
    if u.len() != grid.len() {
        return Err(Error::config("function does not match the grid"));
    }
    let coords = grid.coords();
    let vals = u.values();
    let (values, argopt): (Vec<f64>, Vec<usize>) = coords
        .par_iter()
        .map(|&x| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (j, &y) in coords.iter().enumerate() {
                let c = vals[j] - (x - y).norm_sq() / eps;
                if c > best.0 {
                    best = (c, j);
                }
            }
            best
        })
        .unzip();
    Ok(ConvolutionResult {
        values: GridFunction::from_values(values),
        argopt,
        eps,
    })
}

/// `u_ε = −(−u)^ε`.
pub fn inf_convolve(grid: &Grid, u: &GridFunction, eps: f64) -> Result<ConvolutionResult> {
    let r = sup_convolve(grid, &u.map(|v| -v), eps)?;
    Ok(ConvolutionResult {
        values: r.values.map(|v| -v),
        argopt: r.argopt,
        eps,
    })
}

/// Space-time sup-convolution of a sampled trajectory, with the same penalty
/// on `|t − τ|²` and `|x − y|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeConvolution {
    pub values: Vec<GridFunction>,
    /// `(stamp, node)` of the maximizer.
    pub argopt: Vec<Vec<(usize, usize)>>,
    pub eps: f64,
}

pub fn sup_convolve_space_time(grid: &Grid, times: &[f64], u: &[GridFunction], eps: f64) -> Result<SpaceTimeConvolution> {
    check_eps(eps)?;
    if times.len() != u.len() || u.iter().any(|s| s.len() != grid.len()) {
        return Err(Error::config("snapshots do not match the stamps or the grid"));
    }
    let coords = grid.coords();
    let mut values = Vec::with_capacity(times.len());
    let mut argopt = Vec::with_capacity(times.len());
    for &t in times {
        let (v, a): (Vec<f64>, Vec<(usize, usize)>) = coords
            .par_iter()
            .map(|&x| {
                let mut best = (f64::NEG_INFINITY, (0, 0));
                for (k, (tau, snap)) in times.iter().zip(u).enumerate() {
                    let dt2 = (t - tau) * (t - tau);
                    for (j, &y) in coords.iter().enumerate() {
                        let c = snap.get(j) - ((x - y).norm_sq() + dt2) / eps;
                        if c > best.0 {
                            best = (c, (k, j));
                        }
                    }
                }
                best
            })
            .unzip();
        values.push(GridFunction::from_values(v));
        argopt.push(a);
    }
    Ok(SpaceTimeConvolution { values, argopt, eps })
}

/// Largest `|x − x^ε|² / (2ε ‖u‖_∞)` over the nodes; at most 1 by the control
/// estimate.
pub fn control_ratio(grid: &Grid, u: &GridFunction, result: &ConvolutionResult) -> f64 {
    let norm = u.sup_norm();
    let coords = grid.coords();
    let worst = result
        .argopt
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (i, &j)| m.max((coords[i] - coords[j]).norm_sq()));
    if worst == 0.0 {
        0.0
    } else {
        worst / (2.0 * result.eps * norm)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiconvexityVerdict {
    /// Smallest centered second difference along either axis.
    pub min_second_difference: f64,
    pub node: usize,
    pub bound: f64,
    pub pass: bool,
}

/// Centered second differences of `result.values` along every axis, at nodes
/// with both neighbours on the grid, against `−2/ε − tol`.
pub fn semiconvexity_check(grid: &Grid, result: &ConvolutionResult, tol: f64) -> SemiconvexityVerdict {
    let dx2 = grid.dx() * grid.dx();
    let u = &result.values;
    let axes: &[(i64, i64)] = if grid.dim() == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1)] };
    let mut worst = (f64::INFINITY, 0);
    for k in 0..grid.len() {
        for &(di, dj) in axes {
            if let (Some(a), Some(b)) = (grid.offset(k, di, dj), grid.offset(k, -di, -dj)) {
                let d2 = (u.get(a) - 2.0 * u.get(k) + u.get(b)) / dx2;
                if d2 < worst.0 {
                    worst = (d2, k);
                }
            }
        }
    }
    let bound = -2.0 / result.eps - tol;
    SemiconvexityVerdict {
        min_second_difference: worst.0,
        node: worst.1,
        bound,
        pass: worst.0 >= bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec, Point};

    fn line(dx: f64) -> Grid {
        build_grid(&DomainSpec::interval(-1.0, 1.0).unwrap(), dx).unwrap()
    }

    #[test]
    fn constants_are_fixed() {
        let g = line(0.1);
        let u = GridFunction::from_fn(&g, |_| 2.5);
        let r = sup_convolve(&g, &u, 0.3).unwrap();
        assert!(r.values.values().iter().all(|v| *v == 2.5));
        assert!(r.argopt.iter().enumerate().all(|(i, j)| i == *j));
        let r = inf_convolve(&g, &u, 0.3).unwrap();
        assert!(r.values.values().iter().all(|v| *v == 2.5));
    }

    #[test]
    fn quadratic_envelope() {
        // sup_y [−y² − (x−y)²/ε] = −x²/(1+ε)
        let g = line(0.005);
        let u = GridFunction::from_fn(&g, |p| -p.x * p.x);
        let r = sup_convolve(&g, &u, 0.1).unwrap();
        let k = g.nearest_interior(Point::on_line(0.5));
        let exact = -0.25 / 1.1;
        // maximizer sits within half a cell of x/(1+ε)
        assert!((r.values.get(k) - exact).abs() <= 0.0025f64.powi(2) / 0.1 * 1.1 + 1e-15);
        assert!(r.values.get(k) <= exact + 1e-15);
    }

    #[test]
    fn kink_reaches_the_bound() {
        let g = line(0.01);
        let u = GridFunction::from_fn(&g, |p| -p.x.abs());
        let eps = 0.2;
        let r = sup_convolve(&g, &u, eps).unwrap();
        let v = semiconvexity_check(&g, &r, 1e-9);
        assert!(v.pass);
        assert!((v.min_second_difference + 2.0 / eps).abs() < 1e-6, "{}", v.min_second_difference);
    }

    #[test]
    fn inf_convolution_matches_direct_minimization() {
        let g = build_grid(&DomainSpec::ball(Point::ORIGIN, 1.0, 2).unwrap(), 0.1).unwrap();
        let u = GridFunction::from_fn(&g, |p| (4.0 * p.x).sin() * p.y + p.x.abs());
        let eps = 0.05;
        let r = inf_convolve(&g, &u, eps).unwrap();
        for (i, &x) in g.coords().iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (j, &y) in g.coords().iter().enumerate() {
                let c = u.get(j) + (x - y).norm_sq() / eps;
                if c < best.0 {
                    best = (c, j);
                }
            }
            assert_eq!(r.values.get(i).to_bits(), best.0.to_bits());
            assert_eq!(r.argopt[i], best.1);
        }
    }

    #[test]
    fn space_time_envelope_dominates() {
        let g = line(0.1);
        let times = [0.0, 0.1, 0.2];
        let snaps: Vec<GridFunction> = times.iter().map(|t| GridFunction::from_fn(&g, |p| (p.x + t).cos())).collect();
        let r = sup_convolve_space_time(&g, &times, &snaps, 0.05).unwrap();
        for (k, s) in snaps.iter().enumerate() {
            assert!(r.values[k].values().iter().zip(s.values()).all(|(a, b)| a >= b));
        }
    }

    #[test]
    fn bad_eps_is_rejected() {
        let g = line(0.5);
        let u = GridFunction::zeros(&g);
        assert!(sup_convolve(&g, &u, 0.0).is_err());
        assert!(sup_convolve(&g, &u, f64::NAN).is_err());
    }
}
