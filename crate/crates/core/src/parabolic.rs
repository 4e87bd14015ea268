//! Implicit Euler for `∂_t u + h(t,x) u + L(t) u = f(t,x)` and the long-time
//! measurements: fitted decay rates and weighted constants `C d^η e^{−λt}`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, Grid};
use crate::linalg::{bicgstab, sup_norm, LinearSolver, ShiftedSystem, Weights};
use crate::operator::{DiscreteOperator, GridFunction};

/// Default bound on stored stamps per trajectory.
pub const MAX_SNAPSHOTS: usize = 200;

/// Relative residual for steps whose matrix differs from the cached one.
const PERTURBED_TOL: f64 = 1e-12;

/// Stationary target for `T = ∞`: `‖u − v‖_∞ ≤ 1e-12 ‖v‖_∞`.
pub const STATIONARY_TOL: f64 = 1e-12;

/// Distances below this multiple of the solution scale are round-off.
pub const DISTANCE_FLOOR: f64 = 1e-10;

/// `amplitude · e^{−rate t} · d^{η−2s}`, added to a stationary coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    pub amplitude: f64,
    pub rate: f64,
    pub eta: f64,
}

impl Perturbation {
    pub fn at(&self, t: f64, d: f64, s: f64) -> f64 {
        self.amplitude * (-self.rate * t).exp() * d.powf(self.eta - 2.0 * s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Finite(f64),
    /// Run until the stationary target is met or `t_max` is reached.
    Stationary { t_max: f64 },
}

impl Horizon {
    pub fn end(&self) -> f64 {
        match *self {
            Horizon::Finite(t) => t,
            Horizon::Stationary { t_max } => t_max,
        }
    }
}

/// `|u_0| d^{−η_1} ≤ C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialCertificate {
    pub eta1: f64,
    pub c: f64,
}

/// `(|f(t)−f| + |h(t)−h|) d^{2s−η_2} e^{λt} ≤ C_1` and
/// `|Ω(t,x) △ Ω(x)| d^{−N−η_2} e^{λt} ≤ C_2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayCertificate {
    pub eta2: f64,
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Clone, Debug)]
pub struct ParabolicProblem<'a> {
    /// Stationary operator. Its family may carry a time law for ρ.
    pub op: &'a DiscreteOperator,
    /// Stationary forcing.
    pub f: GridFunction,
    pub u0: GridFunction,
    pub f_decay: Option<Perturbation>,
    pub h_decay: Option<Perturbation>,
    pub dt: f64,
    pub horizon: Horizon,
    pub initial_certificate: Option<InitialCertificate>,
    pub decay_certificate: Option<DecayCertificate>,
    pub max_snapshots: usize,
}

impl<'a> ParabolicProblem<'a> {
    pub fn new(op: &'a DiscreteOperator, f: GridFunction, u0: GridFunction, dt: f64, horizon: Horizon) -> Self {
        ParabolicProblem {
            op,
            f,
            u0,
            f_decay: None,
            h_decay: None,
            dt,
            horizon,
            initial_certificate: None,
            decay_certificate: None,
            max_snapshots: MAX_SNAPSHOTS,
        }
    }

    /// True when the step matrix changes with time.
    pub fn matrix_varies(&self) -> bool {
        self.h_decay.is_some() || self.op.family().is_time_dependent()
    }

    /// `f(t)` on the unknowns.
    pub fn forcing_at(&self, t: f64) -> Vec<f64> {
        let s = self.op.params().s();
        let mut b = self.op.restrict(&self.f);
        if let Some(p) = &self.f_decay {
            for (v, d) in b.iter_mut().zip(self.op.dist()) {
                *v += p.at(t, *d, s);
            }
        }
        b
    }

    /// `h(t)` on the unknowns.
    pub fn h_at(&self, t: f64) -> Vec<f64> {
        let s = self.op.params().s();
        let mut h = self.op.h().to_vec();
        if let Some(p) = &self.h_decay {
            for (v, d) in h.iter_mut().zip(self.op.dist()) {
                *v += p.at(t, *d, s);
            }
        }
        h
    }

    /// Checks step, horizon, grids, positivity of `h(t)` and the certificates
    /// at `samples` times spread over the horizon.
    pub fn verify(&self, samples: usize) -> Result<()> {
        let grid = self.op.grid();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config_key("dt", format!("time step {} must be positive", self.dt)));
        }
        let end = self.horizon.end();
        if !(end > 0.0 && end.is_finite()) {
            return Err(Error::config_key("t_max", format!("horizon {end} must be positive and finite")));
        }
        if self.u0.len() != grid.len() || self.f.len() != grid.len() {
            return Err(Error::config("initial datum or forcing does not match the grid"));
        }
        if !self.u0.is_finite() || !self.f.is_finite() {
            return Err(Error::config("initial datum or forcing is not finite"));
        }
        if self.max_snapshots < 2 {
            return Err(Error::config_key("max_snapshots", "at least two stamps are required"));
        }
        let two_s = 2.0 * self.op.params().s();
        if let Some(c) = &self.initial_certificate {
            if !(c.eta1 > 0.0 && c.eta1 < two_s) {
                return Err(Error::config_key("eta1", format!("initial exponent {} must lie in (0, 2s)", c.eta1)));
            }
            let worst = self
                .op
                .nodes()
                .iter()
                .zip(self.op.dist())
                .fold(0.0f64, |m, (&k, d)| m.max(self.u0.get(k).abs() * d.powf(-c.eta1)));
            if worst > c.c * (1.0 + 1e-12) {
                return Err(Error::config_key(
                    "u0_c",
                    format!("initial certificate fails: max |u0| d^-eta1 = {worst} > {}", c.c),
                ));
            }
        }
        let times: Vec<f64> = (0..samples.max(1)).map(|k| end * k as f64 / samples.max(1) as f64).collect();
        for &t in &times {
            if self.h_at(t).iter().any(|h| !(*h > 0.0)) {
                return Err(Error::config_key("h_decay_amp", format!("h(t) is not positive at t = {t}")));
            }
        }
        if let Some(c) = &self.decay_certificate {
            if !(c.eta2 > 0.0 && c.eta2 < two_s) {
                return Err(Error::config_key("eta2", format!("decay exponent {} must lie in (0, 2s)", c.eta2)));
            }
            for &t in &times {
                let (c1, c2) = decay_constants(self, c.eta2, c.lambda, t);
                if c1 > c.c1 * (1.0 + 1e-12) {
                    return Err(Error::config_key("c1", format!("data decay certificate fails at t = {t}: {c1} > {}", c.c1)));
                }
                if c2 > c.c2 * (1.0 + 1e-12) {
                    return Err(Error::config_key("c2", format!("domain decay certificate fails at t = {t}: {c2} > {}", c.c2)));
                }
            }
        }
        Ok(())
    }
}

/// The two certificate quantities at time `t`, maximized over the unknowns.
/// The symmetric difference of the balls `B_ρ(t)` and `B_ρ` is bounded by
/// the volume difference, ignoring the clipping by Ω.
pub fn decay_constants(problem: &ParabolicProblem, eta2: f64, lambda: f64, t: f64) -> (f64, f64) {
    let op = problem.op;
    let s = op.params().s();
    let dim = op.grid().dim() as i32;
    let grow = (lambda * t).exp();
    let family = op.family();
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for &d in op.dist() {
        let df = problem.f_decay.map_or(0.0, |p| p.at(t, d, s).abs());
        let dh = problem.h_decay.map_or(0.0, |p| p.at(t, d, s).abs());
        c1 = c1.max((df + dh) * d.powf(2.0 * s - eta2) * grow);
        if family.is_time_dependent() {
            let r0 = family.radius(d, None).unwrap_or(0.0);
            let rt = family.radius(d, Some(t)).unwrap_or(0.0);
            let vol = unit_ball_volume(dim as usize) * (rt.powi(dim) - r0.powi(dim)).abs();
            c2 = c2.max(vol * d.powf(-(dim as f64) - eta2) * grow);
        }
    }
    (c1, c2)
}

/// Implicit Euler with a cached factorization of `I + Δt A` for the
/// stationary data. Steps whose matrix differs use BiCGSTAB preconditioned by
/// that factorization.
pub struct Stepper<'p, 'a> {
    problem: &'p ParabolicProblem<'a>,
    base: LinearSolver<'p>,
}

impl<'p, 'a> Stepper<'p, 'a> {
    pub fn new(problem: &'p ParabolicProblem<'a>) -> Result<Self> {
        let base = LinearSolver::new(problem.op.step_system(problem.dt))?;
        Ok(Stepper { problem, base })
    }

    /// `(I + Δt A(t+Δt)) u_new = u + Δt f(t+Δt)` on the unknowns.
    pub fn step(&self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        let p = self.problem;
        let dt = p.dt;
        let tn = t + dt;
        let rhs: Vec<f64> = u.iter().zip(p.forcing_at(tn)).map(|(u, f)| u + dt * f).collect();
        if !p.matrix_varies() {
            return self.base.solve(&rhs);
        }
        let h = p.h_at(tn);
        let moved = p.op.family().time.is_some_and(|td| td.amplitude * (-td.rate * tn).exp() != 0.0);
        let reassembled;
        let weights: &Weights = if moved {
            reassembled = p.op.reassemble_at(tn);
            reassembled.weights()
        } else {
            p.op.weights()
        };
        let diag = h
            .iter()
            .zip(weights.row_sums())
            .map(|(h, r)| 1.0 + dt * (h + r))
            .collect();
        let sys = ShiftedSystem { weights, diag, c: dt };
        bicgstab(|x| sys.apply(x), |r| self.base.apply_inverse(r), &rhs, Some(u), PERTURBED_TOL, 2_000)
    }
}

/// One implicit Euler step from `u` at time `t`.
pub fn step(problem: &ParabolicProblem, u: &GridFunction, t: f64) -> Result<GridFunction> {
    let op = problem.op;
    let v = Stepper::new(problem)?.step(&op.restrict(u), t)?;
    Ok(op.extend(&v))
}

/// Decay factor per unit time of the homogeneous implicit Euler recurrence
/// along the principal mode: `ln(1 + Δt λ̄) / Δt`.
pub fn step_rate(lambda_bar: f64, dt: f64) -> f64 {
    (dt * lambda_bar).ln_1p() / dt
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Arc<Grid>,
    pub times: Vec<f64>,
    pub snapshots: Vec<GridFunction>,
    /// `‖u(t) − v‖_∞` at every stamp.
    pub distances: Vec<f64>,
    pub stationary: GridFunction,
    pub steps: usize,
    /// The `T = ∞` target was met before `t_max`.
    pub reached_stationary: bool,
}

impl Trajectory {
    /// Sup norm of the stationary solution, or of the initial distance when
    /// that vanishes.
    pub fn scale(&self) -> f64 {
        let v = self.stationary.sup_norm();
        if v > 0.0 {
            v
        } else {
            self.distances.first().copied().unwrap_or(0.0)
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs the problem over its horizon. The stationary state `v` solves
/// `A v = f` with the stationary data.
pub fn evolve(problem: &ParabolicProblem) -> Result<Trajectory> {
    problem.verify(16)?;
    let op = problem.op;
    let v = LinearSolver::new(op.system(0.0))?.solve(&op.restrict(&problem.f))?;
    let stepper = Stepper::new(problem)?;
    let end = problem.horizon.end();
    let total = (end / problem.dt).ceil() as usize;
    let vnorm = sup_norm(&v);
    let mut u = op.restrict(&problem.u0);
    let target = STATIONARY_TOL * if vnorm > 0.0 { vnorm } else { sup_norm(&u) };

    // stamps kept at multiples of `stride`, which doubles whenever the store fills up
    let cap = problem.max_snapshots - 1;
    let mut stride = 1usize;
    let mut kept: Vec<(usize, f64, Vec<f64>, f64)> = vec![(0, 0.0, u.clone(), distance(&u, &v))];
    let mut t = 0.0;
    let mut reached = false;
    let mut k = 0;
    while k < total {
        u = stepper.step(&u, t)?;
        k += 1;
        t = k as f64 * problem.dt;
        let dist = distance(&u, &v);
        if matches!(problem.horizon, Horizon::Stationary { .. }) && dist <= target {
            reached = true;
            break;
        }
        if k % stride == 0 && k < total {
            kept.push((k, t, u.clone(), dist));
            if kept.len() > cap {
                stride *= 2;
                kept.retain(|e| e.0 % stride == 0);
            }
        }
    }
    kept.push((k, t, u.clone(), distance(&u, &v)));
    if !u.iter().all(|x| x.is_finite()) {
        return Err(Error::numerical("trajectory became non-finite", f64::INFINITY));
    }
    let mut traj = Trajectory {
        grid: op.grid_arc(),
        times: Vec::with_capacity(kept.len()),
        snapshots: Vec::with_capacity(kept.len()),
        distances: Vec::with_capacity(kept.len()),
        stationary: op.extend(&v),
        steps: k,
        reached_stationary: reached,
    };
    for (_, t, u, d) in kept {
        traj.times.push(t);
        traj.snapshots.push(op.extend(&u));
        traj.distances.push(d);
    }
    Ok(traj)
}

/// Least-squares line through `(t, ln ‖u(t) − v‖_∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// Minus the slope.
    pub rate: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Fits the decay rate over `window`. Stamps whose distance sits at the
/// round-off floor are dropped; fewer than three remaining rejects the window.
pub fn decay_rate(traj: &Trajectory, stationary: &GridFunction, window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    if !(t0 < t1) {
        return Err(Error::WindowRejected(format!("empty window [{t0}, {t1}]")));
    }
    let last = traj.times.last().copied().unwrap_or(0.0);
    if t0 < 0.0 || t1 > last * (1.0 + 1e-12) {
        return Err(Error::WindowRejected(format!("window [{t0}, {t1}] leaves the trajectory [0, {last}]")));
    }
    let vnorm = stationary.sup_norm();
    let first = distance(traj.snapshots[0].values(), stationary.values());
    let floor = DISTANCE_FLOOR * if vnorm > 0.0 { vnorm } else { first };
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.snapshots)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(t, u)| (*t, distance(u.values(), stationary.values())))
        .filter(|(_, d)| *d > floor)
        .map(|(t, d)| (t, d.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::WindowRejected(format!(
            "{} stamps above the round-off floor {floor:e} in [{t0}, {t1}]",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit {
        rate: -slope,
        intercept: my - slope * mt,
        points: pts.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedDecay {
    /// Smallest `C` with `|u − v| ≤ C d^η e^{−λt}` at every stamp and node.
    pub c: f64,
    pub node: usize,
    pub time: f64,
    /// Running maximum of the constant at every stamp.
    pub running: Vec<f64>,
    /// The running maximum grows more slowly over the last quarter of the run
    /// than over the quarter before it.
    pub stable: bool,
}

/// Differences at the round-off floor of [`decay_rate`] count as zero.
pub fn weighted_decay_check(traj: &Trajectory, stationary: &GridFunction, eta: f64, lambda: f64) -> WeightedDecay {
    let grid = &traj.grid;
    let floor = DISTANCE_FLOOR * traj.scale();
    let mut best = (0.0f64, grid.interior().first().copied().unwrap_or(0), 0.0);
    let mut running = Vec::with_capacity(traj.times.len());
    for (t, u) in traj.times.iter().zip(&traj.snapshots) {
        let grow = (lambda * t).exp();
        for &k in grid.interior() {
            let w = (u.get(k) - stationary.get(k)).abs();
            if w <= floor {
                continue;
            }
            let c = w * grow / grid.dist(k).powf(eta);
            if c > best.0 {
                best = (c, k, *t);
            }
        }
        running.push(best.0);
    }
    let at = |frac: f64| {
        let end = traj.times.last().copied().unwrap_or(0.0);
        let i = traj.times.partition_point(|t| *t <= frac * end);
        running[i.saturating_sub(1)]
    };
    let (half, three, full) = (at(0.5), at(0.75), at(1.0));
    let stable = full.is_finite() && full - three <= three - half;
    WeightedDecay {
        c: best.0,
        node: best.1,
        time: best.2,
        running,
        stable,
    }
}

/// Number of (stamp, node) pairs where `lower > upper`.
pub fn ordering_violations(lower: &Trajectory, upper: &Trajectory) -> usize {
    lower
        .snapshots
        .iter()
        .zip(&upper.snapshots)
        .map(|(a, b)| a.values().iter().zip(b.values()).filter(|(x, y)| x > y).count())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainFamily, DomainSpec, FamilyRule, RhoLaw, SigmaSpec, TimeDependence};
    use crate::operator::{assemble, CoefficientProfile, FracParams};
    use crate::spectral::{principal_eigen, EigenOptions};

    fn op_1d(family: DomainFamily) -> DiscreteOperator {
        let g = Arc::new(build_grid(&DomainSpec::interval(0.0, 1.0).unwrap(), 0.025).unwrap());
        assemble(g, &family, FracParams::new(0.5).unwrap(), &CoefficientProfile::killing(), None).unwrap()
    }

    fn ones(op: &DiscreteOperator) -> GridFunction {
        GridFunction::interior_fn(op.grid(), |_, _| 1.0)
    }

    #[test]
    fn zero_data_stays_zero() {
        let op = op_1d(DomainFamily::constant(0.4));
        let z = GridFunction::zeros(op.grid());
        let p = ParabolicProblem::new(&op, z.clone(), z, 0.01, Horizon::Finite(0.5));
        let tr = evolve(&p).unwrap();
        assert!(tr.snapshots.iter().all(|u| u.values().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn single_step_matches_dense_solve() {
        let op = op_1d(DomainFamily::constant(0.4));
        let u0 = GridFunction::interior_fn(op.grid(), |p, _| (3.0 * p.x).sin());
        let p = ParabolicProblem::new(&op, ones(&op), u0.clone(), 0.05, Horizon::Finite(1.0));
        let u1 = op.restrict(&step(&p, &u0, 0.0).unwrap());
        let m = op.step_system(0.05).to_dense();
        let rhs: Vec<f64> = op.restrict(&u0).iter().map(|u| u + 0.05).collect();
        let x = m.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        let err = u1.iter().zip(x.iter()).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err <= 1e-10 * sup_norm(x.as_slice()), "{err}");
    }

    #[test]
    fn stationary_start_stays_put() {
        let op = op_1d(DomainFamily::constant(0.4));
        let f = ones(&op);
        let v = op.extend(&LinearSolver::new(op.system(0.0)).unwrap().solve(&op.restrict(&f)).unwrap());
        let p = ParabolicProblem::new(&op, f, v.clone(), 0.01, Horizon::Finite(1.0));
        let tr = evolve(&p).unwrap();
        assert!(tr.distances.iter().all(|d| *d <= 1e-12 * v.sup_norm()));
        let w = weighted_decay_check(&tr, &v, 0.25, 1.0);
        assert!(w.c == 0.0 && w.stable);
        assert!(matches!(decay_rate(&tr, &v, (0.1, 0.9)), Err(Error::WindowRejected(_))));
    }

    #[test]
    fn homogeneous_decay_follows_step_rate() {
        let op = op_1d(DomainFamily::constant(0.4));
        let lb = principal_eigen(&op, &EigenOptions::default()).unwrap().lambda;
        let dt = 0.01 / lb;
        let u0 = GridFunction::interior_fn(op.grid(), |p, _| p.x * (1.0 - p.x));
        let f = ones(&op);
        let p = ParabolicProblem::new(&op, f, u0, dt, Horizon::Finite(20.0 / lb));
        let tr = evolve(&p).unwrap();
        assert!(tr.times.len() <= MAX_SNAPSHOTS);
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
        assert!(tr.distances.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let fit = decay_rate(&tr, &tr.stationary, (6.0 / lb, 16.0 / lb)).unwrap();
        let expect = step_rate(lb, dt);
        assert!((fit.rate / expect - 1.0).abs() < 1e-3, "{} vs {expect}", fit.rate);
    }

    #[test]
    fn forcing_decay_sets_the_rate() {
        let op = op_1d(DomainFamily::constant(0.4));
        let lb = principal_eigen(&op, &EigenOptions::default()).unwrap().lambda;
        let f = ones(&op);
        let v = op.extend(&LinearSolver::new(op.system(0.0)).unwrap().solve(&op.restrict(&f)).unwrap());
        let lam = 0.5 * lb;
        let mut p = ParabolicProblem::new(&op, f, v.clone(), 0.01 / lb, Horizon::Finite(30.0 / lb));
        p.f_decay = Some(Perturbation {
            amplitude: 1.0,
            rate: lam,
            eta: 0.5,
        });
        p.decay_certificate = Some(DecayCertificate {
            eta2: 0.5,
            lambda: lam,
            c1: 1.0,
            c2: 0.0,
        });
        let tr = evolve(&p).unwrap();
        let fit = decay_rate(&tr, &v, (10.0 / lb, 30.0 / lb)).unwrap();
        assert!((fit.rate / lam - 1.0).abs() < 1e-3, "{}", fit.rate);
        let w = weighted_decay_check(&tr, &v, 0.25, lam);
        assert!(w.c.is_finite() && w.c > 0.0 && w.stable);
        // growing faster than the data decays is not stable
        let w = weighted_decay_check(&tr, &v, 0.25, 1.5 * lam);
        assert!(!w.stable);
    }

    #[test]
    fn certificates_are_checked() {
        let op = op_1d(DomainFamily::constant(0.4));
        let u0 = ones(&op);
        let mut p = ParabolicProblem::new(&op, ones(&op), u0, 0.01, Horizon::Finite(1.0));
        p.initial_certificate = Some(InitialCertificate { eta1: 0.5, c: 10.0 });
        // |u0| d^{-1/2} reaches (0.025)^{-1/2} ≈ 6.3
        assert!(p.verify(4).is_ok());
        p.initial_certificate = Some(InitialCertificate { eta1: 0.5, c: 5.0 });
        assert!(p.verify(4).is_err());
        p.initial_certificate = None;
        p.h_decay = Some(Perturbation {
            amplitude: -10.0,
            rate: 1.0,
            eta: 0.5,
        });
        assert!(matches!(p.verify(4), Err(Error::Config { .. })));
    }

    #[test]
    fn ordered_data_stay_ordered_under_moving_domains() {
        let fam = DomainFamily::new(
            FamilyRule::BallRadius(RhoLaw::Constant(0.2)),
            SigmaSpec::full_space(),
            0.4,
        )
        .unwrap()
        .with_time(TimeDependence {
            amplitude: 0.5,
            rate: 2.0,
        })
        .unwrap();
        let op = op_1d(fam);
        let f = ones(&op);
        let lo = GridFunction::interior_fn(op.grid(), |p, _| -p.x);
        let hi = GridFunction::interior_fn(op.grid(), |p, _| 1.0 - p.x);
        let mut p = ParabolicProblem::new(&op, f, lo, 0.01, Horizon::Finite(1.0));
        p.h_decay = Some(Perturbation {
            amplitude: 0.3,
            rate: 2.0,
            eta: 0.5,
        });
        let a = evolve(&p).unwrap();
        p.u0 = hi;
        let b = evolve(&p).unwrap();
        assert_eq!(ordering_violations(&a, &b), 0);
        let (_, c2) = decay_constants(&p, 0.5, 1.0, 0.5);
        assert!(c2 > 0.0);
    }

    #[test]
    fn infinite_horizon_stops_at_the_target() {
        let op = op_1d(DomainFamily::constant(0.4));
        let p = ParabolicProblem::new(&op, ones(&op), GridFunction::zeros(op.grid()), 0.05, Horizon::Stationary { t_max: 100.0 });
        let tr = evolve(&p).unwrap();
        assert!(tr.reached_stationary);
        assert!(*tr.distances.last().unwrap() <= STATIONARY_TOL * tr.stationary.sup_norm());
        assert!(*tr.times.last().unwrap() < 100.0);
    }
}
