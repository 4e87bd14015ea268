//! The ten acceptance checks as library routines, used by `verify-all`.
//!
//! Criteria 1, 2, 3 and 9 run on fixed desk instances. The others run on the
//! operator described by an experiment config.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use crate::config::ExperimentConfig;
use crate::elliptic::{barrier_margin, check_comparison, find_barrier};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, sphere_measure, DomainFamily, DomainSpec, FamilyRule, Point, RhoLaw, SigmaSpec};
use crate::geometry::{Grid, TimeDependence};
use crate::linalg::LinearSolver;
use crate::operator::{
    assemble, fractional_laplacian_zero_ext, killing_term, kinetic_at, kinetic_coefficient, localize,
    CoefficientProfile, DiscreteOperator, FracParams, GridFunction, TailRule,
};
use crate::parabolic::{decay_rate, evolve, weighted_decay_check, Horizon, ParabolicProblem, Perturbation};
use crate::spectral::{check_simplicity, principal_eigen, probe_e, solve_below_lambda, EigenOptions};
use crate::vistools::{control_ratio, inf_convolve, semiconvexity_check, sup_convolve};

/// Ball-quadratic test at Δx and at Δx/2. The radius sits on the lattice at
/// both levels, where the node rule converges at first order.
pub const QUADRATIC_RADIUS: f64 = 0.5;
pub const QUADRATIC_DX: f64 = 0.01;
pub const QUADRATIC_TOL_COARSE: f64 = 0.02;
pub const QUADRATIC_TOL_FINE: f64 = 0.01;
/// Odd data on symmetric stencils, relative to `Σ w |u(x) − u(y)|`.
pub const ODD_TOL: f64 = 1e-12;
/// Slack on `k d^{2s} ≤ ω_N/(2s)`.
pub const KILLING_SLACK: f64 = 1e-6;
pub const CLOSED_FORM_TOL: f64 = 1e-8;
pub const EQUIVALENCE_TOL: f64 = 0.03;
pub const KINETIC_VALUE_TOL: f64 = 1e-6;
pub const INVERSE_FLOOR: f64 = -1e-12;
pub const COMPARISON_TRIALS: usize = 100;
pub const STEP_SIZES: [f64; 3] = [1e-3, 1e-2, 1e-1];
pub const ORACLE_TOL: f64 = 1e-8;
pub const BELOW_FRACTIONS: [f64; 2] = [0.5, 0.9];
pub const ABOVE_FRACTION: f64 = 1.1;
pub const RATE_TOL: f64 = 0.05;
pub const FORCED_RATE_FLOOR: f64 = 0.95;
pub const DATA_RATE_FRACTION: f64 = 0.5;
pub const WEIGHTED_FRACTIONS: [f64; 3] = [0.5, 0.7, 0.9];
pub const EPS_VALUES: [f64; 3] = [1e-1, 1e-2, 1e-3];
pub const SEMICONVEX_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CriterionOutcome {
    /// `criterion <id> <PASS|FAIL> <name>: <detail>`.
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {}: {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn outcome(id: usize, name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> CriterionOutcome {
    match body() {
        Ok((pass, detail)) => CriterionOutcome { id, name, pass, detail },
        Err(e) => CriterionOutcome {
            id,
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn interval_grid(a: f64, b: f64, dx: f64) -> Result<Arc<Grid>> {
    Ok(Arc::new(build_grid(&DomainSpec::interval(a, b)?, dx)?))
}

/// `apply_pv` of `(y − x)²` at the middle of `(−1, 1)` with `Ω(x) = B_r(x)`,
/// relative to `−2 r^{2−2s}/(2−2s)`.
pub fn ball_quadratic_error(s: f64, r: f64, dx: f64) -> Result<f64> {
    let g = interval_grid(-1.0, 1.0, dx)?;
    let fam = DomainFamily::new(FamilyRule::BallRadius(RhoLaw::Constant(r)), SigmaSpec::full_space(), 0.2)?;
    let op = assemble(g.clone(), &fam, FracParams::new(s)?, &CoefficientProfile::synthetic(1.0), None)?;
    let x = g.nearest_interior(Point::on_line(0.0));
    let cx = g.coord(x);
    let u = GridFunction::from_fn(&g, |p| (p - cx).norm_sq());
    let exact = -2.0 * r.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    Ok((op.apply_pv(&u, x) / exact - 1.0).abs())
}

/// Largest `|L u(x)| / Σ_y w_xy |u(x) − u(y)|` over nodes whose ball stencil
/// stays inside Ω, for affine `u`.
pub fn odd_residual(op: &DiscreteOperator, radius: f64, u: &GridFunction) -> f64 {
    let grid = op.grid();
    let mut worst = 0.0f64;
    for (i, &x) in op.nodes().iter().enumerate() {
        if op.dist()[i] <= radius + grid.dx() {
            continue;
        }
        let ux = u.get(x);
        let mass: f64 = op
            .weights()
            .row(i)
            .into_iter()
            .map(|(j, w)| w * (ux - u.get(op.nodes()[j])).abs())
            .sum();
        if mass > 0.0 {
            worst = worst.max(op.apply_pv(u, x).abs() / mass);
        }
    }
    worst
}

pub fn criterion_1() -> CriterionOutcome {
    outcome(1, "operator exactness", || {
        let mut pass = true;
        let mut notes = Vec::new();
        // constants, on a dense and on a star-shaped 2D operator
        let g = interval_grid(0.0, 1.0, 0.02)?;
        let op1 = assemble(g.clone(), &DomainFamily::constant(0.4), FracParams::new(0.25)?, &CoefficientProfile::killing(), None)?;
        let g2 = Arc::new(build_grid(&DomainSpec::l_shape(), 0.1)?);
        let fam2 = DomainFamily::new(FamilyRule::StarShaped, SigmaSpec::full_space(), 0.4)?;
        let op2 = assemble(g2.clone(), &fam2, FracParams::new(0.6)?, &CoefficientProfile::synthetic(1.0), None)?;
        for op in [&op1, &op2] {
            let one = GridFunction::from_fn(op.grid(), |_| 1.0);
            let worst = op.nodes().iter().fold(0.0f64, |m, &x| m.max(op.apply_pv(&one, x).abs()));
            pass &= worst == 0.0;
            notes.push(format!("max|L1| = {worst:e}"));
        }
        // odd data on symmetric ball stencils
        let r = 0.2;
        let fam = DomainFamily::new(FamilyRule::BallRadius(RhoLaw::Constant(r)), SigmaSpec::full_space(), 0.2)?;
        let ball = Arc::new(build_grid(&DomainSpec::ball(Point::ORIGIN, 1.0, 2)?, 0.05)?);
        for (grid, s) in [(g.clone(), 0.3), (ball, 0.7)] {
            let op = assemble(grid.clone(), &fam, FracParams::new(s)?, &CoefficientProfile::synthetic(1.0), None)?;
            let u = GridFunction::from_fn(&grid, |p| 0.7 * p.x - 0.4 * p.y + 0.3);
            let odd = odd_residual(&op, r, &u);
            pass &= odd <= ODD_TOL;
            notes.push(format!("odd {}D {odd:.1e}", grid.dim()));
        }
        // ball quadratic under refinement
        for s in [0.25, 0.75] {
            let coarse = ball_quadratic_error(s, QUADRATIC_RADIUS, QUADRATIC_DX)?;
            let fine = ball_quadratic_error(s, QUADRATIC_RADIUS, QUADRATIC_DX / 2.0)?;
            pass &= coarse <= QUADRATIC_TOL_COARSE && fine <= QUADRATIC_TOL_FINE && fine < coarse;
            notes.push(format!("quadratic s={s}: {:.3}% -> {:.3}%", 100.0 * coarse, 100.0 * fine));
        }
        Ok((pass, notes.join("; ")))
    })
}

pub fn criterion_2() -> CriterionOutcome {
    outcome(2, "killing-term bounds", || {
        let mut pass = true;
        let mut notes = Vec::new();
        let domains = [
            (DomainSpec::interval(0.0, 1.0)?, 0.01),
            (DomainSpec::ball(Point::ORIGIN, 1.0, 2)?, 0.05),
            (DomainSpec::l_shape(), 0.05),
        ];
        for s in [0.25, 0.75] {
            let params = FracParams::new(s)?;
            for (dom, dx) in &domains {
                let grid = build_grid(dom, *dx)?;
                let k = killing_term(&grid, params);
                let bound = sphere_measure(grid.dim()) / (2.0 * s);
                let worst = grid
                    .interior()
                    .iter()
                    .fold(0.0f64, |m, &x| m.max(k.get(x) * grid.dist(x).powf(2.0 * s) / bound));
                pass &= worst <= 1.0 + KILLING_SLACK;
                notes.push(format!("{} s={s}: max k d^2s / bound = {worst:.6}", dom.kind_name()));
                if grid.dim() == 1 {
                    let err = grid.interior().iter().fold(0.0f64, |m, &x| {
                        let t = grid.coord(x).x;
                        let exact = (t.powf(-2.0 * s) + (1.0 - t).powf(-2.0 * s)) / (2.0 * s);
                        m.max((k.get(x) / exact - 1.0).abs())
                    });
                    pass &= err <= CLOSED_FORM_TOL;
                    notes.push(format!("closed form rel err {err:.1e}"));
                }
            }
        }
        Ok((pass, notes.join("; ")))
    })
}

/// Smooth bumps supported inside the ball `B_R(c)`, times smooth factors.
pub fn equivalence_test_functions(c: Point, radius: f64) -> Vec<Box<dyn Fn(Point) -> f64 + Send + Sync>> {
    let bump = move |p: Point, c: Point, r: f64| {
        let z = (p - c).norm_sq() / (r * r);
        if z < 1.0 {
            (1.0 - z).powi(4)
        } else {
            0.0
        }
    };
    let off = Point::new(c.x + 0.3 * radius, c.y);
    vec![
        Box::new(move |p| bump(p, c, 0.9 * radius)),
        Box::new(move |p| bump(p, c, 0.9 * radius) * (1.0 + p.x)),
        Box::new(move |p| bump(p, c, 0.9 * radius) * (3.0 * p.x).cos() * (1.0 + 0.5 * p.y)),
        Box::new(move |p| bump(p, off, 0.6 * radius)),
        Box::new(move |p| bump(p, c, 0.9 * radius).powi(2) * p.x.exp()),
    ]
}

/// `max_x |Γ(2s+1)(−Δ)_s φ − a φ − Γ(2s+1) L φ| / max_x |a φ + Γ(2s+1) L φ|`
/// for each test function, on the constant family over a convex domain.
pub fn equivalence_errors(domain: &DomainSpec, dx: f64, s: f64) -> Result<Vec<f64>> {
    let grid = Arc::new(build_grid(domain, dx)?);
    let params = FracParams::new(s)?;
    let op = assemble(grid.clone(), &DomainFamily::constant(0.4), params, &CoefficientProfile::synthetic(1.0), None)?;
    let a = kinetic_coefficient(&grid, params)?;
    let g = gamma(2.0 * s + 1.0);
    let (lo, hi) = domain.bounding_box();
    let center = Point::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    let reach = (domain.diameter() / dx).ceil() as i64 + 3;
    let mut out = Vec::new();
    for phi in equivalence_test_functions(center, domain.boundary_distance(center)) {
        let u = GridFunction::from_fn(&grid, &phi);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for &x in op.nodes() {
            let p = grid.coord(x);
            let lhs = g * fractional_laplacian_zero_ext(&phi, p, dx, grid.dim(), params, reach);
            let rhs = a.get(x) * u.get(x) + g * op.apply_pv(&u, x);
            num = num.max((lhs - rhs).abs());
            den = den.max(rhs.abs());
        }
        out.push(num / den);
    }
    Ok(out)
}

pub fn criterion_3() -> CriterionOutcome {
    outcome(3, "equivalence on convex domains", || {
        let mut pass = true;
        let mut notes = Vec::new();
        let cases = [
            (DomainSpec::interval(0.0, 1.0)?, 0.01, 0.005),
            (DomainSpec::ball(Point::ORIGIN, 1.0, 2)?, 0.1, 0.05),
        ];
        for s in [0.25, 0.75] {
            for (dom, coarse, fine) in &cases {
                let ec = equivalence_errors(dom, *coarse, s)?;
                let ef = equivalence_errors(dom, *fine, s)?;
                let worst_f = ef.iter().copied().fold(0.0, f64::max);
                let improves = ec.iter().zip(&ef).all(|(c, f)| f < c);
                pass &= worst_f <= EQUIVALENCE_TOL && improves;
                notes.push(format!(
                    "{} s={s}: max {:.2}% -> {:.2}%",
                    dom.kind_name(),
                    100.0 * ec.iter().copied().fold(0.0, f64::max),
                    100.0 * worst_f
                ));
            }
        }
        let a = kinetic_at(&DomainSpec::interval(0.0, 1.0)?, Point::on_line(0.5), 0.25, 2)?;
        let exact = PI.sqrt() * 2.0 * 2f64.sqrt();
        pass &= (a - exact).abs() <= KINETIC_VALUE_TOL;
        notes.push(format!("a(1/2) = {a:.10}"));
        Ok((pass, notes.join("; ")))
    })
}

fn alpha_of(cfg: &ExperimentConfig, op: &DiscreteOperator) -> f64 {
    cfg.operator.alpha.unwrap_or_else(|| op.alpha())
}

/// Barrier on the config grid and on the grid refined by 2, where the coarse
/// exponent must still have a nonnegative margin.
pub fn barrier_check(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let op = cfg.operator()?;
    let b = find_barrier(&op, alpha_of(cfg, &op), Some(&cfg.forcing(&op)))?;
    let fine = cfg.refined(2.0).operator()?;
    let alpha_f = alpha_of(cfg, &fine);
    let margin_f = barrier_margin(&fine, alpha_f, b.eta);
    let two_s = 2.0 * fine.params().s();
    let scale = 0.5 * alpha_f * fine.dist().iter().fold(0.0f64, |m, d| m.max(d.powf(b.eta - two_s)));
    let worst_f = margin_f.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = b.eta > 0.0 && b.min_margin() >= 0.0 && worst_f >= -1e-13 * scale;
    Ok((
        pass,
        format!(
            "eta = {:.4e}, Q = {:.3e}, min margin {:.3e}, at dx/2 {:.3e}",
            b.eta,
            b.q,
            b.min_margin(),
            worst_f
        ),
    ))
}

pub fn criterion_4(configs: &[&ExperimentConfig]) -> CriterionOutcome {
    outcome(4, "barrier", || {
        let mut pass = true;
        let mut notes = Vec::new();
        for cfg in configs {
            let (ok, note) = barrier_check(cfg)?;
            pass &= ok;
            notes.push(format!("{}: {note}", cfg.domain.kind));
        }
        Ok((pass, notes.join("; ")))
    })
}

fn min_entry(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn criterion_5(cfg: &ExperimentConfig) -> CriterionOutcome {
    outcome(5, "comparison and monotonicity", || {
        let op = cfg.operator()?;
        let mut notes = Vec::new();
        let inv = op
            .to_dense()
            .try_inverse()
            .ok_or_else(|| Error::numerical("operator matrix is singular", f64::INFINITY))?;
        let mut worst = min_entry(&inv);
        notes.push(format!("min A^-1 entry {worst:.2e}"));
        for dt in STEP_SIZES {
            let inv = op
                .step_system(dt)
                .to_dense()
                .try_inverse()
                .ok_or_else(|| Error::numerical("step matrix is singular", f64::INFINITY))?;
            let m = min_entry(&inv);
            worst = worst.min(m);
            notes.push(format!("dt={dt}: {m:.2e}"));
        }
        let solver = LinearSolver::new(op.system(0.0))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
        let mut violations = 0;
        let mut rejected = 0;
        for _ in 0..COMPARISON_TRIALS {
            let f: Vec<f64> = (0..op.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gap = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..op.n())
                    .map(|_| if rng.random_bool(0.5) { rng.random_range(0.0..0.1) } else { 0.0 })
                    .collect()
            };
            let (d1, d2) = (gap(&mut rng), gap(&mut rng));
            let fl: Vec<f64> = f.iter().zip(&d1).map(|(f, d)| f - d).collect();
            let fu: Vec<f64> = f.iter().zip(&d2).map(|(f, d)| f + d).collect();
            let u = op.extend(&solver.solve(&fl)?);
            let v = op.extend(&solver.solve(&fu)?);
            let report = check_comparison(&op, &u, &v, &op.extend(&f));
            match report.outcome {
                crate::elliptic::ComparisonOutcome::Holds { .. } => {}
                crate::elliptic::ComparisonOutcome::Violated { .. } => violations += 1,
                crate::elliptic::ComparisonOutcome::Rejected { .. } => rejected += 1,
            }
        }
        notes.push(format!("{COMPARISON_TRIALS} pairs: {violations} violations, {rejected} rejected"));
        Ok((worst >= INVERSE_FLOOR && violations == 0 && rejected == 0, notes.join("; ")))
    })
}

fn eigen(cfg: &ExperimentConfig, op: &DiscreteOperator) -> Result<crate::spectral::SpectralResult> {
    principal_eigen(
        op,
        &EigenOptions {
            tol: cfg.solver.eig_tol,
            max_iter: cfg.solver.eig_max_iter,
            ..EigenOptions::default()
        },
    )
}

pub fn criterion_6(cfg: &ExperimentConfig) -> CriterionOutcome {
    outcome(6, "principal eigenvalue", || {
        let op = cfg.operator()?;
        let r = eigen(cfg, &op)?;
        let oracle = r
            .oracle_lambda
            .ok_or_else(|| Error::numerical("dense oracle unavailable", f64::NAN))?;
        let rel = (r.lambda - oracle).abs() / oracle.abs();
        let simp = check_simplicity(&r, &op);
        let lambdas = cfg.probe_lambdas(r.lambda);
        let f = cfg.forcing(&op);
        let g = GridFunction::interior_fn(op.grid(), |p, d| d.powf(0.5) * (2.0 + (5.0 * p.x).sin()));
        let pf = probe_e(&op, &f, &lambdas, None);
        let pg = probe_e(&op, &g, &lambdas, None);
        let contains = pf.bracket.is_some_and(|(lo, hi)| lo < r.lambda && r.lambda <= hi);
        let idx = |b: Option<(f64, f64)>| b.map(|(_, hi)| lambdas.iter().position(|l| *l == hi).unwrap_or(usize::MAX));
        let same = match (idx(pf.bracket), idx(pg.bracket)) {
            (Some(a), Some(b)) => a.abs_diff(b) <= 1,
            _ => false,
        };
        let pass = rel <= ORACLE_TOL
            && r.min_value > 0.0
            && simp.rank_deficiency == 1
            && simp.simple
            && contains
            && same
            && pf.monotone
            && pg.monotone;
        Ok((
            pass,
            format!(
                "lambda = {:.12e}, oracle rel err {rel:.1e}, min phi {:.3e}, rank deficiency {}, fit {:.1e}, bracket f {:?} g {:?}",
                r.lambda, r.min_value, simp.rank_deficiency, simp.fit_residual, pf.bracket, pg.bracket
            ),
        ))
    })
}

pub fn criterion_7(cfg: &ExperimentConfig) -> CriterionOutcome {
    outcome(7, "solvability below the principal eigenvalue", || {
        let op = cfg.operator()?;
        let lb = eigen(cfg, &op)?.lambda;
        let f = cfg.forcing(&op);
        let mut pass = true;
        let mut notes = Vec::new();
        for fr in BELOW_FRACTIONS {
            let u = solve_below_lambda(&op, fr * lb, &f, lb)?;
            let m = op.restrict(&u).into_iter().fold(f64::INFINITY, f64::min);
            pass &= m > 0.0;
            notes.push(format!("{fr} lambda: min u {m:.3e}"));
        }
        let above = solve_below_lambda(&op, ABOVE_FRACTION * lb, &f, lb);
        let rejected = matches!(above, Err(Error::SpectralShift { .. }));
        pass &= rejected;
        notes.push(format!("{ABOVE_FRACTION} lambda rejected: {rejected}"));
        Ok((pass, notes.join("; ")))
    })
}

/// Step used by the decay experiments: the config step, capped at `0.01/λ̄`.
pub fn decay_step(cfg: &ExperimentConfig, lambda_bar: f64) -> f64 {
    cfg.solver.dt.min(0.01 / lambda_bar)
}

pub fn criterion_8(cfg: &ExperimentConfig) -> CriterionOutcome {
    outcome(8, "long-time decay", || {
        let op = cfg.operator()?;
        let lb = eigen(cfg, &op)?.lambda;
        let dt = decay_step(cfg, lb);
        let f = cfg.forcing(&op);
        let s = op.params().s();
        let mut pass = true;
        let mut notes = Vec::new();

        // time-independent data from rest
        let p = ParabolicProblem::new(&op, f.clone(), GridFunction::zeros(op.grid()), dt, Horizon::Finite(20.0 / lb));
        let tr = evolve(&p)?;
        let fit = decay_rate(&tr, &tr.stationary, (8.0 / lb, 16.0 / lb))?;
        let rel = (fit.rate / lb - 1.0).abs();
        pass &= rel <= RATE_TOL;
        notes.push(format!("homogeneous rate {:.5e} vs lambda {lb:.5e} ({:.2}%)", fit.rate, 100.0 * rel));

        // f, h (and ρ for ball families) relaxing at λ = λ̄/2
        let lam = DATA_RATE_FRACTION * lb;
        let moving;
        let op_t = if let FamilyRule::BallRadius(_) = op.family().rule {
            let fam = op.family().clone().with_time(TimeDependence {
                amplitude: 0.3,
                rate: lam,
            })?;
            moving = assemble(op.grid_arc(), &fam, op.params(), &cfg.profile()?, None)?;
            &moving
        } else {
            &op
        };
        let pert = |amplitude| Perturbation {
            amplitude,
            rate: lam,
            eta: s,
        };
        let mut p = ParabolicProblem::new(op_t, f.clone(), GridFunction::zeros(op.grid()), dt, Horizon::Finite(30.0 / lb));
        p.f_decay = Some(pert(1.0));
        p.h_decay = Some(pert(0.5 * op.alpha()));
        let tr = evolve(&p)?;
        let fit = decay_rate(&tr, &tr.stationary, (15.0 / lb, 30.0 / lb))?;
        pass &= fit.rate >= FORCED_RATE_FLOOR * lam;
        notes.push(format!("data at {DATA_RATE_FRACTION} lambda: rate {:.5e} vs {lam:.5e}", fit.rate));

        // weighted constants from the stationary start
        let eta = find_barrier(&op, alpha_of(cfg, &op), None)?.eta;
        let v = tr.stationary.clone();
        let mut cs = Vec::new();
        for fr in WEIGHTED_FRACTIONS {
            let lam = fr * lb;
            let mut p = ParabolicProblem::new(&op, f.clone(), v.clone(), dt, Horizon::Finite(40.0 / lb));
            p.f_decay = Some(Perturbation {
                amplitude: 1.0,
                rate: lam,
                eta,
            });
            let tr = evolve(&p)?;
            let w = weighted_decay_check(&tr, &v, eta, lam);
            pass &= w.c.is_finite() && w.c > 0.0 && w.stable;
            cs.push(w.c);
        }
        pass &= cs.windows(2).all(|w| w[1] > w[0]);
        let shown: Vec<String> = cs.iter().map(|c| format!("{c:.4e}")).collect();
        notes.push(format!("C(lambda) at {WEIGHTED_FRACTIONS:?} lambda: [{}]", shown.join(", ")));
        Ok((pass, notes.join("; ")))
    })
}

pub fn criterion_9(seed: u64) -> CriterionOutcome {
    outcome(9, "sup-convolution", || {
        let grid = build_grid(&DomainSpec::interval(-1.0, 1.0)?, 0.01)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tests = [
            ("-x^2", GridFunction::from_fn(&grid, |p| -p.x * p.x)),
            ("-|x|", GridFunction::from_fn(&grid, |p| -p.x.abs())),
            ("noise", GridFunction::from_values(noise)),
        ];
        let mut pass = true;
        let mut worst_control = 0.0f64;
        let mut worst_semi = f64::INFINITY;
        for (_, u) in &tests {
            for eps in EPS_VALUES {
                let sup = sup_convolve(&grid, u, eps)?;
                worst_control = worst_control.max(control_ratio(&grid, u, &sup));
                let semi = semiconvexity_check(&grid, &sup, SEMICONVEX_TOL);
                pass &= semi.pass;
                worst_semi = worst_semi.min(semi.min_second_difference - semi.bound);
                let inf = inf_convolve(&grid, u, eps)?;
                let neg = sup_convolve(&grid, &u.map(|v| -v), eps)?;
                let dual = inf
                    .values
                    .values()
                    .iter()
                    .zip(neg.values.values())
                    .all(|(a, b)| a.to_bits() == (-b).to_bits());
                pass &= dual;
            }
        }
        pass &= worst_control <= 1.0;
        Ok((
            pass,
            format!("max |x-x^eps|^2/(2 eps |u|) = {worst_control:.4}; min second-difference slack {worst_semi:.3e}; duality exact"),
        ))
    })
}

/// `j − h` on `O = (0.25, 0.75)` inside `(0, 1)` against the closed form.
pub fn localization_tail_error(s: f64, dx: f64) -> Result<f64> {
    let g = interval_grid(0.0, 1.0, dx)?;
    let op = assemble(g.clone(), &DomainFamily::constant(0.4), FracParams::new(s)?, &CoefficientProfile::killing(), None)?;
    let loc = localize(&op, &DomainSpec::interval(0.25, 0.75)?, TailRule::Quadrature)?;
    let mut worst = 0.0f64;
    for (i, &x) in loc.nodes().iter().enumerate() {
        let t = g.coord(x).x;
        let p = |r: f64| r.powf(-2.0 * s) / (2.0 * s);
        let exact = p(t - 0.25) - p(t) + p(0.75 - t) - p(1.0 - t);
        let h = op.h()[op.unknown_of(x).expect("localized node is an unknown")];
        worst = worst.max(((loc.h()[i] - h) / exact - 1.0).abs());
    }
    Ok(worst)
}

pub fn criterion_10(cfg: &ExperimentConfig) -> CriterionOutcome {
    outcome(10, "localization", || {
        let op = cfg.operator()?;
        let grid = op.grid();
        let (i, dmax) = op
            .dist()
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, d)| if *d > acc.1 { (i, *d) } else { acc });
        let c = grid.coord(op.nodes()[i]);
        let region = if grid.dim() == 1 {
            DomainSpec::interval(c.x - 0.75 * dmax, c.x + 0.75 * dmax)?
        } else {
            DomainSpec::ball(c, 0.75 * dmax, 2)?
        };
        let loc = localize(&op, &region, TailRule::Quadrature)?;
        let (c1, c2) = (loc.alpha(), loc.beta());
        let tail = localization_tail_error(op.params().s(), 0.02)?;
        let pass = c1 > 0.0 && c2.is_finite() && tail <= CLOSED_FORM_TOL;
        Ok((
            pass,
            format!(
                "{} nodes in O: c1 = {c1:.4e}, c2 = {c2:.4e}; 1D tail rel err {tail:.1e}",
                loc.n()
            ),
        ))
    })
}

/// Every criterion; 4 uses `cfg` alone.
pub fn run_all(cfg: &ExperimentConfig) -> Vec<CriterionOutcome> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(&[cfg]),
        criterion_5(cfg),
        criterion_6(cfg),
        criterion_7(cfg),
        criterion_8(cfg),
        criterion_9(cfg.solver.seed),
        criterion_10(cfg),
    ]
}
