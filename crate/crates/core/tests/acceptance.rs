//! The ten acceptance criteria. Every oracle below is written here, from closed
//! forms or from plain dense linear algebra, and the library's own checks in
//! `varfrac::verify` are run alongside as a cross-check.
//!
//! Each test prints one `criterion N PASS|FAIL` line (visible with
//! `--nocapture`) before asserting.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use quadrature::double_exponential;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use varfrac::config::ExperimentConfig;
use varfrac::elliptic::{check_comparison, find_barrier};
use varfrac::geometry::{build_grid, DomainFamily, DomainSpec, FamilyRule, Grid, Point, RhoLaw, SigmaSpec};
use varfrac::operator::{
    assemble, killing_term, kinetic_at, kinetic_coefficient, localize, CoefficientProfile, DiscreteOperator, FracParams,
    GridFunction, TailRule,
};
use varfrac::parabolic::{decay_rate, evolve, weighted_decay_check, Horizon, ParabolicProblem, Perturbation, DISTANCE_FLOOR};
use varfrac::spectral::{check_simplicity, principal_eigen, probe_e, solve_below_lambda, EigenOptions, ProbeOutcome};
use varfrac::verify;
use varfrac::vistools::{control_ratio, inf_convolve, semiconvexity_check, sup_convolve};
use varfrac::Error;

// Tolerances, pinned here and against the library constants in `tolerances_are_pinned`.
const ODD_TOL: f64 = 1e-12;
const QUADRATIC_COARSE: f64 = 0.02;
const QUADRATIC_FINE: f64 = 0.01;
const KILLING_SLACK: f64 = 1e-6;
const CLOSED_FORM_TOL: f64 = 1e-8;
const EQUIVALENCE_TOL: f64 = 0.03;
const KINETIC_VALUE: f64 = 5.0133;
const KINETIC_VALUE_TOL: f64 = 1e-6;
const INVERSE_FLOOR: f64 = -1e-12;
const COMPARISON_TRIALS: usize = 100;
const ORACLE_TOL: f64 = 1e-8;
const RATE_TOL: f64 = 0.05;
const FORCED_RATE_FLOOR: f64 = 0.95;
const SEMICONVEX_TOL: f64 = 1e-9;

fn report(id: usize, name: &str, checks: &[(String, bool)]) {
    let pass = checks.iter().all(|c| c.1);
    println!("criterion {id:>2} {} {name}", if pass { "PASS" } else { "FAIL" });
    for (what, ok) in checks {
        println!("    [{}] {what}", if *ok { "ok" } else { "FAILED" });
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    assert!(failed.is_empty(), "criterion {id} ({name}) failed: {failed:#?}");
}

fn shipped(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap()
}

const CONFIGS: [&str; 3] = ["reference_1d.cfg", "ball_2d.cfg", "lshape_2d.cfg"];

fn interval(a: f64, b: f64, dx: f64) -> Arc<Grid> {
    Arc::new(build_grid(&DomainSpec::interval(a, b).unwrap(), dx).unwrap())
}

fn disc(dx: f64) -> Arc<Grid> {
    Arc::new(build_grid(&DomainSpec::ball(Point::ORIGIN, 1.0, 2).unwrap(), dx).unwrap())
}

fn ball_family(r: f64) -> DomainFamily {
    DomainFamily::new(FamilyRule::BallRadius(RhoLaw::Constant(r)), SigmaSpec::full_space(), 0.2).unwrap()
}

fn op_on(grid: Arc<Grid>, fam: &DomainFamily, s: f64, profile: CoefficientProfile) -> DiscreteOperator {
    assemble(grid, fam, FracParams::new(s).unwrap(), &profile, None).unwrap()
}

/// `|S^{N−1}|`.
fn sphere(dim: usize) -> f64 {
    if dim == 1 {
        2.0
    } else {
        2.0 * PI
    }
}

/// `∫_{Ω^c} |x − y|^{-N-2s} dy` for the unit interval `(a, b)` in closed form.
fn killing_interval(x: f64, a: f64, b: f64, s: f64) -> f64 {
    ((x - a).powf(-2.0 * s) + (b - x).powf(-2.0 * s)) / (2.0 * s)
}

/// Same for the unit disc, by the periodic trapezoid rule over exit distances.
fn killing_disc(x: Point, s: f64) -> f64 {
    let m = 2048;
    (0..m)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / m as f64;
            let (c, sn) = (th.cos(), th.sin());
            let b = x.x * c + x.y * sn;
            let exit = -b + (b * b + 1.0 - x.norm_sq()).sqrt();
            exit.powf(-2.0 * s) / (2.0 * s)
        })
        .sum::<f64>()
        * 2.0
        * PI
        / m as f64
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_01_operator_exactness() {
    let mut checks = Vec::new();
    // constants: exact zero on a dense 1D and a star-shaped L-shape operator
    let ops = [
        op_on(interval(0.0, 1.0, 0.02), &DomainFamily::constant(0.4), 0.25, CoefficientProfile::killing()),
        op_on(
            Arc::new(build_grid(&DomainSpec::l_shape(), 0.1).unwrap()),
            &DomainFamily::new(FamilyRule::StarShaped, SigmaSpec::full_space(), 0.4).unwrap(),
            0.6,
            CoefficientProfile::synthetic(1.0),
        ),
    ];
    for op in &ops {
        let one = GridFunction::from_fn(op.grid(), |_| 1.0);
        let worst = op.nodes().iter().map(|&x| op.apply_pv(&one, x).abs()).fold(0.0, f64::max);
        checks.push((format!("constants annihilated in {}D: max |L1| = {worst:e}", op.grid().dim()), worst == 0.0));
    }
    // affine data on ball stencils lying inside Ω: the oracle is 0
    let r = 0.2;
    for (grid, s) in [(interval(-1.0, 1.0, 0.01), 0.3), (disc(0.05), 0.7)] {
        let op = op_on(grid.clone(), &ball_family(r), s, CoefficientProfile::synthetic(1.0));
        let u = GridFunction::from_fn(&grid, |p| 0.7 * p.x - 0.4 * p.y + 0.3);
        let mut worst = 0.0f64;
        for (i, &x) in op.nodes().iter().enumerate() {
            if op.dist()[i] <= r + grid.dx() {
                continue;
            }
            let ux = u.get(x);
            let scale: f64 = op
                .weights()
                .row(i)
                .into_iter()
                .map(|(j, w)| w * (ux - u.get(op.nodes()[j])).abs())
                .sum();
            worst = worst.max(op.apply_pv(&u, x).abs() / scale);
        }
        checks.push((format!("odd data {}D: {worst:.2e} <= {ODD_TOL:e}", grid.dim()), worst <= ODD_TOL));
    }
    // (y − x)² over B_r(x): −2 r^{2−2s}/(2−2s), the 1D radial integral
    let r = verify::QUADRATIC_RADIUS;
    for s in [0.25, 0.75] {
        let err = |dx: f64| {
            let g = interval(-1.0, 1.0, dx);
            let op = op_on(g.clone(), &ball_family(r), s, CoefficientProfile::synthetic(1.0));
            let x = g.nearest_interior(Point::on_line(0.0));
            let cx = g.coord(x).x;
            let u = GridFunction::from_fn(&g, |p| (p.x - cx) * (p.x - cx));
            let exact = -2.0 * r.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
            (op.apply_pv(&u, x) / exact - 1.0).abs()
        };
        let dx = verify::QUADRATIC_DX;
        let (c, f) = (err(dx), err(dx / 2.0));
        checks.push((
            format!("quadratic s={s}: {:.3}% at dx={dx}, {:.3}% at dx/2", 100.0 * c, 100.0 * f),
            c <= QUADRATIC_COARSE && f <= QUADRATIC_FINE && f < c,
        ));
    }
    let lib = verify::criterion_1();
    checks.push((format!("library check agrees: {}", lib.detail), lib.pass));
    report(1, "operator exactness", &checks);
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_02_killing_bounds() {
    let mut checks = Vec::new();
    for s in [0.25, 0.5, 0.75] {
        let p = FracParams::new(s).unwrap();
        for (name, dom, dx) in [
            ("interval", DomainSpec::interval(0.0, 1.0).unwrap(), 0.01),
            ("disc", DomainSpec::ball(Point::ORIGIN, 1.0, 2).unwrap(), 0.05),
            ("l-shape", DomainSpec::l_shape(), 0.05),
        ] {
            let g = build_grid(&dom, dx).unwrap();
            let k = killing_term(&g, p);
            let bound = sphere(g.dim()) / (2.0 * s);
            let worst = g
                .interior()
                .iter()
                .map(|&x| k.get(x) * g.dist(x).powf(2.0 * s) / bound)
                .fold(0.0, f64::max);
            checks.push((format!("{name} s={s}: max k d^2s / (w_N/2s) = {worst:.8}"), worst <= 1.0 + KILLING_SLACK));
            // closed forms
            let mut rel = 0.0f64;
            for &x in g.interior() {
                let p = g.coord(x);
                let exact = match name {
                    "interval" => killing_interval(p.x, 0.0, 1.0, s),
                    "disc" => killing_disc(p, s),
                    _ => continue,
                };
                rel = rel.max((k.get(x) / exact - 1.0).abs());
            }
            if name == "interval" {
                checks.push((format!("interval s={s}: closed form rel err {rel:.2e}"), rel <= CLOSED_FORM_TOL));
            } else if name == "disc" {
                // directional quadrature against a 2048-point trapezoid rule
                checks.push((format!("disc s={s}: trapezoid oracle rel err {rel:.2e}"), rel <= 1e-6));
            }
        }
    }
    let lib = verify::criterion_2();
    checks.push((format!("library check agrees: {}", lib.detail), lib.pass));
    report(2, "killing-term bounds", &checks);
}

// ---------------------------------------------------------------- criterion 3

/// Smooth bump `(1 − |z − c|²/R²)^4` on `B_R(c)`, times a smooth factor.
struct Bump {
    c: Point,
    r: f64,
    factor: fn(Point) -> f64,
}

impl Bump {
    fn eval(&self, p: Point) -> f64 {
        let z = (p - self.c).norm_sq() / (self.r * self.r);
        if z < 1.0 {
            (1.0 - z).powi(4) * (self.factor)(p)
        } else {
            0.0
        }
    }

    /// Parameters `t` where `x + t ω` crosses the support sphere.
    fn crossings(&self, x: Point, w: Point) -> Vec<f64> {
        let d = x - self.c;
        let b = d.x * w.x + d.y * w.y;
        let disc = b * b - (d.norm_sq() - self.r * self.r);
        if disc <= 0.0 {
            return vec![];
        }
        vec![-b - disc.sqrt(), -b + disc.sqrt()]
    }
}

fn bumps(dim: usize) -> Vec<Bump> {
    let c = if dim == 1 { Point::on_line(0.5) } else { Point::ORIGIN };
    let r = if dim == 1 { 0.45 } else { 0.9 };
    let off = Point::new(c.x + 0.3 * r, c.y);
    vec![
        Bump { c, r, factor: |_| 1.0 },
        Bump { c, r, factor: |p| 1.0 + p.x },
        Bump {
            c,
            r,
            factor: |p| (3.0 * p.x).cos() * (1.0 + 0.5 * p.y),
        },
        Bump {
            c: off,
            r: 0.6 * r,
            factor: |_| 1.0,
        },
        Bump {
            c,
            r,
            factor: |p| p.x.exp(),
        },
    ]
}

/// `∫_0^∞ (2ψ(0) − ψ(t) − ψ(−t)) t^{−1−2s} dt` for `ψ(t) = φ(x + t ω)`. The
/// first `T0` uses the second-order Taylor term, the rest is split at the
/// support crossings and finished with the exact tail.
fn line_integral(b: &Bump, x: Point, w: Point, s: f64) -> f64 {
    let psi = |t: f64| b.eval(Point::new(x.x + t * w.x, x.y + t * w.y));
    let p0 = psi(0.0);
    let t0: f64 = 1e-3;
    let h = 1e-4;
    let second = (psi(h) - 2.0 * p0 + psi(-h)) / (h * h);
    let mut total = -second * t0.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let mut cuts: Vec<f64> = b.crossings(x, w).into_iter().map(f64::abs).filter(|t| *t > t0).collect();
    let far = cuts.iter().copied().fold(t0, f64::max).max(2.0 * b.r + 2.0);
    cuts.push(t0);
    cuts.push(far);
    cuts.sort_by(f64::total_cmp);
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi - lo < 1e-14 {
            continue;
        }
        total += double_exponential::integrate(|t| (2.0 * p0 - psi(t) - psi(-t)) * t.powf(-1.0 - 2.0 * s), lo, hi, 1e-12).integral;
    }
    total + 2.0 * p0 * far.powf(-2.0 * s) / (2.0 * s)
}

/// Full-space `(−Δ)_s φ(x)` of the zero extension, unnormalized.
fn frac_laplacian(b: &Bump, x: Point, dim: usize, s: f64) -> f64 {
    if dim == 1 {
        return line_integral(b, x, Point::on_line(1.0), s);
    }
    let m = 96;
    (0..m)
        .map(|k| line_integral(b, x, Point::from_angle(PI * (k as f64 + 0.5) / m as f64), s))
        .sum::<f64>()
        * PI
        / m as f64
}

fn equivalence_error(dim: usize, dx: f64, s: f64, b: &Bump) -> f64 {
    let grid = if dim == 1 { interval(0.0, 1.0, dx) } else { disc(dx) };
    let op = op_on(grid.clone(), &DomainFamily::constant(0.4), s, CoefficientProfile::synthetic(1.0));
    let u = GridFunction::from_fn(&grid, |p| b.eval(p));
    let g = gamma(2.0 * s + 1.0);
    let stride = if dim == 1 { 1 } else { 7 };
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for &x in op.nodes().iter().step_by(stride) {
        let p = grid.coord(x);
        let k = if dim == 1 { killing_interval(p.x, 0.0, 1.0, s) } else { killing_disc(p, s) };
        let rhs = g * (k * u.get(x) + op.apply_pv(&u, x));
        let lhs = g * frac_laplacian(b, p, dim, s);
        num = num.max((lhs - rhs).abs());
        den = den.max(rhs.abs());
    }
    num / den
}

#[test]
fn criterion_03_equivalence_on_convex_domains() {
    let mut checks = Vec::new();
    for s in [0.25, 0.75] {
        for (dim, coarse, fine) in [(1, 0.01, 0.005), (2, 0.1, 0.05)] {
            for (i, b) in bumps(dim).iter().enumerate() {
                let (ec, ef) = (equivalence_error(dim, coarse, s, b), equivalence_error(dim, fine, s, b));
                checks.push((
                    format!("{dim}D s={s} phi{i}: {:.3}% -> {:.3}%", 100.0 * ec, 100.0 * ef),
                    ef <= EQUIVALENCE_TOL && ef < ec,
                ));
            }
        }
    }
    // a = Γ(2s+1) k on convex domains, node by node
    for s in [0.25, 0.75] {
        let p = FracParams::new(s).unwrap();
        for g in [interval(0.0, 1.0, 0.02), disc(0.1)] {
            let a = kinetic_coefficient(&g, p).unwrap();
            let worst = g
                .interior()
                .iter()
                .map(|&x| {
                    let q = g.coord(x);
                    let k = if g.dim() == 1 { killing_interval(q.x, 0.0, 1.0, s) } else { killing_disc(q, s) };
                    (a.get(x) / (gamma(2.0 * s + 1.0) * k) - 1.0).abs()
                })
                .fold(0.0, f64::max);
            checks.push((format!("{}D s={s}: a = Gamma(2s+1) k, rel err {worst:.2e}", g.dim()), worst <= 1e-6));
        }
    }
    let a = kinetic_at(&DomainSpec::interval(0.0, 1.0).unwrap(), Point::on_line(0.5), 0.25, 2).unwrap();
    let exact = gamma(1.5) * killing_interval(0.5, 0.0, 1.0, 0.25);
    checks.push((
        format!("a(1/2), s=1/4: {a:.10} vs {exact:.10} (~{KINETIC_VALUE})"),
        (a - exact).abs() <= KINETIC_VALUE_TOL && (a - KINETIC_VALUE).abs() < 1e-4,
    ));
    // (1 − x²)_+^s on (−1, 1) has (−Δ)_s = π / sin(πs) inside
    for s in [0.25, 0.5, 0.75] {
        let errs: Vec<f64> = [0.01, 0.005, 0.0025]
            .iter()
            .map(|&dx| {
                let g = interval(-1.0, 1.0, dx);
                let op = op_on(g.clone(), &DomainFamily::constant(0.4), s, CoefficientProfile::synthetic(1.0));
                let u = GridFunction::interior_fn(&g, |p, _| (1.0 - p.x * p.x).powf(s));
                let exact = PI / (PI * s).sin();
                op.nodes()
                    .iter()
                    .filter(|&&x| g.coord(x).x.abs() <= 0.5)
                    .map(|&x| {
                        let t = g.coord(x).x;
                        let val = killing_interval(t, -1.0, 1.0, s) * u.get(x) + op.apply_pv(&u, x);
                        (val / exact - 1.0).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        checks.push((
            format!("(1-x^2)^s, s={s}: rel err {:.2e} -> {:.2e} -> {:.2e}", errs[0], errs[1], errs[2]),
            errs[2] <= EQUIVALENCE_TOL && errs[2] < errs[0],
        ));
    }
    let lib = verify::criterion_3();
    checks.push((format!("library check agrees: {}", lib.detail), lib.pass));
    report(3, "equivalence on convex domains", &checks);
}

// ---------------------------------------------------------------- criterion 4

/// `α d^{η−2s}/2 + (L d^η)(x)`, with L read off the dense matrix.
fn margins(op: &DiscreteOperator, alpha: f64, eta: f64) -> Vec<f64> {
    let two_s = 2.0 * op.params().s();
    let a = op.to_dense();
    let b = DVector::from_iterator(op.n(), op.dist().iter().map(|d| d.powf(eta)));
    let ab = &a * &b;
    (0..op.n())
        .map(|i| {
            let d = op.dist()[i];
            let lb = ab[i] - op.h()[i] * b[i];
            alpha * d.powf(-two_s) * b[i] + lb - 0.5 * alpha * d.powf(eta - two_s)
        })
        .collect()
}

#[test]
fn criterion_04_barrier() {
    let mut checks = Vec::new();
    let mut refs = Vec::new();
    for name in CONFIGS {
        let cfg = shipped(name);
        let op = cfg.operator().unwrap();
        let alpha = cfg.operator.alpha.unwrap_or(op.alpha());
        let b = find_barrier(&op, alpha, Some(&cfg.forcing(&op))).unwrap();
        let m = margins(&op, alpha, b.eta);
        let worst = m.iter().copied().fold(f64::INFINITY, f64::min);
        // the library margin matches the dense one
        let agree = m.iter().zip(&b.margin).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        checks.push((format!("{name}: eta = {}, min margin {worst:.4e}", b.eta), b.eta > 0.0 && worst >= 0.0 && agree));
        // Q d^η dominates |f| after the (α/2) d^{η−2s} scaling
        let f = cfg.forcing(&op);
        let q_ok = op
            .nodes()
            .iter()
            .zip(op.dist())
            .all(|(&k, d)| f.get(k).abs() <= b.q * 0.5 * alpha * d.powf(b.eta - 2.0 * op.params().s()) * (1.0 + 1e-12));
        checks.push((format!("{name}: Q = {:.4e} dominates f", b.q), q_ok));
        let fine = cfg.refined(2.0).operator().unwrap();
        let alpha_f = cfg.operator.alpha.unwrap_or(fine.alpha());
        let wf = margins(&fine, alpha_f, b.eta).into_iter().fold(f64::INFINITY, f64::min);
        checks.push((format!("{name}: same eta at dx/2, min margin {wf:.4e}"), wf >= 0.0));
        refs.push(cfg);
    }
    let lib = verify::criterion_4(&refs.iter().collect::<Vec<_>>());
    checks.push((format!("library check agrees: {}", lib.detail), lib.pass));
    report(4, "barrier", &checks);
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_05_comparison_and_monotonicity() {
    let mut checks = Vec::new();
    for name in CONFIGS {
        let cfg = shipped(name);
        let op = cfg.operator().unwrap();
        let a = op.to_dense();
        let n = op.n();
        let mut worst = a.clone().try_inverse().unwrap().min();
        for dt in [1e-3, 1e-2, 1e-1] {
            let m = DMatrix::identity(n, n) + &a * dt;
            worst = worst.min(m.try_inverse().unwrap().min());
        }
        checks.push((format!("{name}: min entry of A^-1 and (I + dt A)^-1 = {worst:.3e}"), worst >= INVERSE_FLOOR));
        let lu = a.clone().lu();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed ^ 0x5eed);
        let (mut ordered, mut lib_holds) = (0, 0);
        for _ in 0..COMPARISON_TRIALS {
            let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let lower = DVector::from_fn(n, |_, _| rng.random_range(0.0..0.2));
            let upper = DVector::from_fn(n, |_, _| rng.random_range(0.0..0.2));
            let u = lu.solve(&(&f - &lower)).unwrap();
            let v = lu.solve(&(&f + &upper)).unwrap();
            let scale = u.amax().max(v.amax());
            if u.iter().zip(v.iter()).all(|(a, b)| *a <= *b + 1e-12 * scale) {
                ordered += 1;
            }
            let rep = check_comparison(
                &op,
                &op.extend(u.as_slice()),
                &op.extend(v.as_slice()),
                &op.extend(f.as_slice()),
            );
            if rep.holds() {
                lib_holds += 1;
            }
        }
        checks.push((
            format!("{name}: {ordered}/{COMPARISON_TRIALS} pairs ordered, library comparison holds {lib_holds}"),
            ordered == COMPARISON_TRIALS && lib_holds == COMPARISON_TRIALS,
        ));
        let lib = verify::criterion_5(&cfg);
        checks.push((format!("{name}: library check agrees: {}", lib.detail), lib.pass));
    }
    report(5, "comparison and monotonicity", &checks);
}

// ---------------------------------------------------------------- criterion 6

/// Perron root of `A⁻¹ ≥ 0` by power iteration, with Collatz–Wielandt bounds;
/// returns `(λ̄, bracket width)`.
fn perron_lambda(op: &DiscreteOperator) -> (f64, f64) {
    let inv = op.to_dense().try_inverse().unwrap();
    let mut v = DVector::from_element(op.n(), 1.0);
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for _ in 0..20_000 {
        let w = &inv * &v;
        let ratios = w.iter().zip(v.iter()).map(|(a, b)| a / b);
        lo = ratios.clone().fold(f64::INFINITY, f64::min);
        hi = ratios.fold(0.0, f64::max);
        v = &w / w.amax();
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    // ρ(A⁻¹) ∈ [lo, hi]
    (2.0 / (lo + hi), (1.0 / lo - 1.0 / hi).abs())
}

fn eigen_of(cfg: &ExperimentConfig, op: &DiscreteOperator) -> varfrac::spectral::SpectralResult {
    principal_eigen(
        op,
        &EigenOptions {
            tol: cfg.solver.eig_tol,
            max_iter: cfg.solver.eig_max_iter,
            ..EigenOptions::default()
        },
    )
    .unwrap()
}

#[test]
fn criterion_06_principal_eigenvalue() {
    let mut checks = Vec::new();
    for name in CONFIGS {
        let cfg = shipped(name);
        let op = cfg.operator().unwrap();
        let (oracle, width) = perron_lambda(&op);
        let r = eigen_of(&cfg, &op);
        let rel = (r.lambda - oracle).abs() / oracle;
        checks.push((
            format!("{name}: lambda {:.12e} vs Perron {oracle:.12e} (rel {rel:.1e}, bracket {width:.1e})", r.lambda),
            rel <= ORACLE_TOL,
        ));
        // positive eigenvector with A φ = λ φ
        let phi = op.restrict(&r.eigenfunction);
        let aphi = op.apply(&phi);
        let resid = aphi.iter().zip(&phi).map(|(a, p)| (a - r.lambda * p).abs()).fold(0.0, f64::max);
        checks.push((
            format!("{name}: min phi {:.3e}, residual {resid:.1e}", r.min_value),
            r.min_value > 0.0 && phi.iter().all(|p| *p > 0.0) && resid <= 1e-6 * r.lambda,
        ));
        // one singular value of A − λ̄ I at round-off level
        let shifted = op.to_dense() - DMatrix::identity(op.n(), op.n()) * oracle;
        let sv = shifted.singular_values();
        let small = sv.iter().filter(|v| **v <= 1e-9 * sv.max()).count();
        let simp = check_simplicity(&r, &op);
        checks.push((format!("{name}: {small} null singular value(s); library {}", simp.rank_deficiency), small == 1 && simp.rank_deficiency == 1));
        // solvability with a positive solution brackets λ̄, for two forcings
        let lambdas = cfg.probe_lambdas(r.lambda);
        let a = op.to_dense();
        let mut brackets = Vec::new();
        for f in [cfg.forcing(&op), GridFunction::interior_fn(op.grid(), |p, d| d.sqrt() * (2.0 + (5.0 * p.x).sin()))] {
            let b = DVector::from_column_slice(&op.restrict(&f));
            let last = lambdas
                .iter()
                .take_while(|&&l| {
                    let m = &a - DMatrix::identity(op.n(), op.n()) * l;
                    m.lu().solve(&b).is_some_and(|u| u.iter().all(|x| *x > 0.0))
                })
                .count();
            let lib = probe_e(&op, &f, &lambdas, None);
            let lib_last = lib.outcomes.iter().take_while(|o| **o == ProbeOutcome::SolvablePositive).count();
            brackets.push((last, lib_last));
        }
        let ok = brackets.iter().all(|&(k, kl)| {
            k == kl && k >= 1 && k < lambdas.len() && lambdas[k - 1] < oracle && oracle <= lambdas[k]
        }) && brackets[0].0.abs_diff(brackets[1].0) <= 1;
        checks.push((format!("{name}: probe brackets (dense, library) {brackets:?}"), ok));
        let lib = verify::criterion_6(&cfg);
        checks.push((format!("{name}: library check agrees"), lib.pass));
    }
    report(6, "principal eigenvalue", &checks);
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_07_solvability_below_lambda() {
    let mut checks = Vec::new();
    for name in CONFIGS {
        let cfg = shipped(name);
        let op = cfg.operator().unwrap();
        let (lb, _) = perron_lambda(&op);
        let f = cfg.forcing(&op);
        let b = DVector::from_column_slice(&op.restrict(&f));
        let a = op.to_dense();
        for fr in [0.5, 0.9] {
            let dense = (&a - DMatrix::identity(op.n(), op.n()) * (fr * lb)).lu().solve(&b).unwrap();
            let lib = op.restrict(&solve_below_lambda(&op, fr * lb, &f, lb).unwrap());
            let diff = dense.iter().zip(&lib).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            checks.push((
                format!("{name}: {fr} lambda: min u {:.3e}, library diff {diff:.1e}", dense.min()),
                dense.min() > 0.0 && diff <= 1e-8 * dense.amax(),
            ));
        }
        // above λ̄ the shifted system still solves, but not positively
        let above = (&a - DMatrix::identity(op.n(), op.n()) * (1.1 * lb)).lu().solve(&b).unwrap();
        let rejected = matches!(solve_below_lambda(&op, 1.1 * lb, &f, lb), Err(Error::SpectralShift { .. }));
        checks.push((
            format!("{name}: 1.1 lambda: dense min u {:.3e}, library rejects: {rejected}", above.min()),
            above.min() <= 0.0 && rejected,
        ));
        let lib = verify::criterion_7(&cfg);
        checks.push((format!("{name}: library check agrees"), lib.pass));
    }
    report(7, "solvability below the principal eigenvalue", &checks);
}

// ---------------------------------------------------------------- criterion 8

/// Least-squares slope of `ln y` against `t`, negated.
fn fitted_rate(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mt, ml) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y.ln() / n));
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y.ln() - ml), b + (t - mt) * (t - mt)));
    -num / den
}

fn in_window(times: &[f64], dists: &[f64], t0: f64, t1: f64, floor: f64) -> Vec<(f64, f64)> {
    times
        .iter()
        .zip(dists)
        .filter(|(t, d)| **t >= t0 && **t <= t1 && **d > floor)
        .map(|(t, d)| (*t, *d))
        .collect()
}

#[test]
fn criterion_08_long_time_decay() {
    let mut checks = Vec::new();
    for name in CONFIGS {
        let cfg = shipped(name);
        let op = cfg.operator().unwrap();
        let (lb, _) = perron_lambda(&op);
        let dt = cfg.solver.dt.min(0.01 / lb);
        let f = cfg.forcing(&op);
        let n = op.n();

        // implicit Euler written out densely, time-independent data from rest
        let a = op.to_dense();
        let b = DVector::from_column_slice(&op.restrict(&f));
        let v = a.clone().lu().solve(&b).unwrap();
        let step = (DMatrix::identity(n, n) + &a * dt).lu();
        let mut u = DVector::zeros(n);
        let steps = (20.0 / lb / dt).ceil() as usize;
        let mut hist = Vec::with_capacity(steps);
        for k in 1..=steps {
            u = step.solve(&(&u + &b * dt)).unwrap();
            hist.push((k as f64 * dt, (&u - &v).amax()));
        }
        let pts: Vec<(f64, f64)> = hist.iter().copied().filter(|(t, _)| *t >= 8.0 / lb && *t <= 16.0 / lb).collect();
        let rate = fitted_rate(&pts);
        let p = ParabolicProblem::new(&op, f.clone(), GridFunction::zeros(op.grid()), dt, Horizon::Finite(20.0 / lb));
        let tr = evolve(&p).unwrap();
        let lib = decay_rate(&tr, &tr.stationary, (8.0 / lb, 16.0 / lb)).unwrap();
        checks.push((
            format!("{name}: rate {rate:.5e} vs lambda {lb:.5e}; library fit {:.5e}", lib.rate),
            (rate / lb - 1.0).abs() <= RATE_TOL && (lib.rate / rate - 1.0).abs() <= 1e-3,
        ));

        // f and h relaxing at λ = λ̄/2, and Ω(t,x) too for ball families
        let lam = 0.5 * lb;
        let moving;
        let op_t = if let FamilyRule::BallRadius(_) = op.family().rule {
            let fam = op
                .family()
                .clone()
                .with_time(varfrac::geometry::TimeDependence { amplitude: 0.3, rate: lam })
                .unwrap();
            moving = assemble(op.grid_arc(), &fam, op.params(), &cfg.profile().unwrap(), None).unwrap();
            &moving
        } else {
            &op
        };
        let s = op.params().s();
        let mut p = ParabolicProblem::new(op_t, f.clone(), GridFunction::zeros(op.grid()), dt, Horizon::Finite(30.0 / lb));
        p.f_decay = Some(Perturbation { amplitude: 1.0, rate: lam, eta: s });
        p.h_decay = Some(Perturbation { amplitude: 0.5 * op.alpha(), rate: lam, eta: s });
        let tr = evolve(&p).unwrap();
        let scale = tr.scale();
        let rate = fitted_rate(&in_window(&tr.times, &tr.distances, 15.0 / lb, 30.0 / lb, DISTANCE_FLOOR * scale));
        checks.push((format!("{name}: data at lambda/2: rate {rate:.5e} >= 0.95 x {lam:.5e}"), rate >= FORCED_RATE_FLOOR * lam));

        // C(λ) = sup |u − v| e^{λt} / d^η from the stationary start
        let eta = find_barrier(&op, op.alpha(), None).unwrap().eta;
        let vst = tr.stationary.clone();
        let mut cs = Vec::new();
        for fr in [0.5, 0.7, 0.9] {
            let lam = fr * lb;
            let mut p = ParabolicProblem::new(&op, f.clone(), vst.clone(), dt, Horizon::Finite(40.0 / lb));
            p.f_decay = Some(Perturbation { amplitude: 1.0, rate: lam, eta });
            let tr = evolve(&p).unwrap();
            let floor = DISTANCE_FLOOR * tr.scale();
            let mut c = 0.0f64;
            for (t, snap) in tr.times.iter().zip(&tr.snapshots) {
                for (i, &k) in op.nodes().iter().enumerate() {
                    let w = (snap.get(k) - vst.get(k)).abs();
                    if w > floor {
                        c = c.max(w * (lam * t).exp() / op.dist()[i].powf(eta));
                    }
                }
            }
            let lib = weighted_decay_check(&tr, &vst, eta, lam);
            checks.push((
                format!("{name}: C({fr} lambda) = {c:.4e}, library {:.4e}, stable {}", lib.c, lib.stable),
                c.is_finite() && (lib.c / c - 1.0).abs() <= 1e-12 && lib.stable,
            ));
            cs.push(c);
        }
        checks.push((format!("{name}: C(lambda) increasing {cs:?}"), cs.windows(2).all(|w| w[1] > w[0])));
        let lib = verify::criterion_8(&cfg);
        checks.push((format!("{name}: library check agrees"), lib.pass));
    }
    report(8, "long-time decay", &checks);
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_09_sup_convolution() {
    let mut checks = Vec::new();
    let g = build_grid(&DomainSpec::interval(-1.0, 1.0).unwrap(), 0.01).unwrap();
    let xs: Vec<f64> = g.coords().iter().map(|p| p.x).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let noise: Vec<f64> = xs.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let tests: Vec<(&str, Vec<f64>)> = vec![
        ("-x^2", xs.iter().map(|x| -x * x).collect()),
        ("-|x|", xs.iter().map(|x| -x.abs()).collect()),
        ("noise", noise),
    ];
    for (name, vals) in &tests {
        let u = GridFunction::from_values(vals.clone());
        let norm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for eps in [0.1, 0.01, 0.001] {
            // brute force envelope, first maximizer
            let (env, arg): (Vec<f64>, Vec<usize>) = xs
                .iter()
                .map(|x| {
                    let mut best = (f64::NEG_INFINITY, 0);
                    for (j, y) in xs.iter().enumerate() {
                        let c = vals[j] - (x - y) * (x - y) / eps;
                        if c > best.0 {
                            best = (c, j);
                        }
                    }
                    best
                })
                .unzip();
            let lib = sup_convolve(&g, &u, eps).unwrap();
            let same = lib.values.values().iter().zip(&env).all(|(a, b)| a.to_bits() == b.to_bits()) && lib.argopt == arg;
            let control = arg
                .iter()
                .enumerate()
                .map(|(i, &j)| (xs[i] - xs[j]).powi(2))
                .fold(0.0, f64::max);
            let control_ok = control <= 2.0 * eps * norm;
            let lib_ratio = control_ratio(&g, &u, &lib);
            let dx2 = g.dx() * g.dx();
            let d2 = (1..xs.len() - 1)
                .map(|i| (env[i + 1] - 2.0 * env[i] + env[i - 1]) / dx2)
                .fold(f64::INFINITY, f64::min);
            let semi = semiconvexity_check(&g, &lib, SEMICONVEX_TOL);
            let inf = inf_convolve(&g, &u, eps).unwrap();
            let neg = sup_convolve(&g, &u.map(|v| -v), eps).unwrap();
            let dual = inf.values.values().iter().zip(neg.values.values()).all(|(a, b)| *a == -*b);
            let dominates = env.iter().zip(vals).all(|(e, v)| e >= v);
            checks.push((
                format!("{name} eps={eps}: control {:.4}, min u'' {d2:.4e} vs {:.4e}", control / (2.0 * eps * norm), -2.0 / eps),
                same && control_ok
                    && (lib_ratio - control / (2.0 * eps * norm)).abs() <= 1e-12
                    && d2 >= -2.0 / eps - SEMICONVEX_TOL
                    && semi.pass
                    && dual
                    && dominates,
            ));
        }
    }
    // the continuum envelope of −x² is −x²/(1+ε); the lattice can only lose
    let u = GridFunction::from_fn(&g, |p| -p.x * p.x);
    let eps = 0.1;
    let lib = sup_convolve(&g, &u, eps).unwrap();
    let worst = g
        .coords()
        .iter()
        .enumerate()
        .map(|(i, p)| -p.x * p.x / (1.0 + eps) - lib.values.get(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let cell = (g.dx() / 2.0).powi(2) * (1.0 + eps) / eps;
    checks.push((format!("quadratic envelope gap {worst:.2e} within [0, {cell:.2e}]"), worst >= -1e-15 && worst <= cell));
    let lib = verify::criterion_9(7);
    checks.push((format!("library check agrees: {}", lib.detail), lib.pass));
    report(9, "sup-convolution", &checks);
}

// --------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_localization() {
    let mut checks = Vec::new();
    for s in [0.25, 0.5, 0.75] {
        let g = interval(0.0, 1.0, 0.02);
        let op = op_on(g.clone(), &DomainFamily::constant(0.4), s, CoefficientProfile::killing());
        let loc = localize(&op, &DomainSpec::interval(0.25, 0.75).unwrap(), TailRule::Quadrature).unwrap();
        let q = |r: f64| r.powf(-2.0 * s) / (2.0 * s);
        let mut worst = 0.0f64;
        for (i, &x) in loc.nodes().iter().enumerate() {
            let t = g.coord(x).x;
            let h = op.h()[op.unknown_of(x).unwrap()];
            let exact = q(t - 0.25) - q(t) + q(0.75 - t) - q(1.0 - t);
            worst = worst.max(((loc.h()[i] - h) / exact - 1.0).abs());
        }
        // j is then the killing term of O itself
        let j_ok = loc.nodes().iter().enumerate().all(|(i, &x)| {
            let t = g.coord(x).x;
            (loc.h()[i] / killing_interval(t, 0.25, 0.75, s) - 1.0).abs() <= 1e-8
        });
        checks.push((format!("1D s={s}: j - h closed form rel err {worst:.2e}"), worst <= CLOSED_FORM_TOL && j_ok));
    }
    for name in CONFIGS {
        let cfg = shipped(name);
        let op = cfg.operator().unwrap();
        let g = op.grid();
        let (i, dmax) = op
            .dist()
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, d)| if *d > acc.1 { (i, *d) } else { acc });
        let c = g.coord(op.nodes()[i]);
        let region = if g.dim() == 1 {
            DomainSpec::interval(c.x - 0.75 * dmax, c.x + 0.75 * dmax).unwrap()
        } else {
            DomainSpec::ball(c, 0.75 * dmax, 2).unwrap()
        };
        let loc = localize(&op, &region, TailRule::Quadrature).unwrap();
        let two_s = 2.0 * op.params().s();
        let scaled: Vec<f64> = loc.h().iter().zip(loc.dist()).map(|(j, d)| j * d.powf(two_s)).collect();
        let c1 = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let c2 = scaled.iter().copied().fold(0.0, f64::max);
        // j ≥ h, and the kept interactions are those of the original rows
        let dominates = loc.nodes().iter().enumerate().all(|(k, &x)| loc.h()[k] >= op.h()[op.unknown_of(x).unwrap()]);
        let rows_kept = loc.nodes().iter().enumerate().all(|(k, &x)| {
            let orig = op.weights().row(op.unknown_of(x).unwrap());
            loc.weights().row(k).into_iter().all(|(j, w)| {
                let y = op.unknown_of(loc.nodes()[j]).unwrap();
                orig.iter().any(|&(jj, ww)| jj == y && ww == w)
            })
        });
        checks.push((
            format!("{name}: {} nodes in O, c1 = {c1:.4e}, c2 = {c2:.4e}", loc.n()),
            c1 > 0.0 && c2.is_finite() && dominates && rows_kept && (loc.alpha() - c1).abs() <= 1e-12 * c1,
        ));
        let lib = verify::criterion_10(&cfg);
        checks.push((format!("{name}: library check agrees: {}", lib.detail), lib.pass));
    }
    report(10, "localization", &checks);
}

#[test]
fn tolerances_are_pinned() {
    assert_eq!(verify::ODD_TOL, ODD_TOL);
    assert_eq!(verify::QUADRATIC_TOL_COARSE, QUADRATIC_COARSE);
    assert_eq!(verify::QUADRATIC_TOL_FINE, QUADRATIC_FINE);
    assert_eq!(verify::KILLING_SLACK, KILLING_SLACK);
    assert_eq!(verify::CLOSED_FORM_TOL, CLOSED_FORM_TOL);
    assert_eq!(verify::EQUIVALENCE_TOL, EQUIVALENCE_TOL);
    assert_eq!(verify::KINETIC_VALUE_TOL, KINETIC_VALUE_TOL);
    assert_eq!(verify::INVERSE_FLOOR, INVERSE_FLOOR);
    assert_eq!(verify::COMPARISON_TRIALS, COMPARISON_TRIALS);
    assert_eq!(verify::STEP_SIZES, [1e-3, 1e-2, 1e-1]);
    assert_eq!(verify::ORACLE_TOL, ORACLE_TOL);
    assert_eq!(verify::BELOW_FRACTIONS, [0.5, 0.9]);
    assert_eq!(verify::ABOVE_FRACTION, 1.1);
    assert_eq!(verify::RATE_TOL, RATE_TOL);
    assert_eq!(verify::FORCED_RATE_FLOOR, FORCED_RATE_FLOOR);
    assert_eq!(verify::DATA_RATE_FRACTION, 0.5);
    assert_eq!(verify::WEIGHTED_FRACTIONS, [0.5, 0.7, 0.9]);
    assert_eq!(verify::EPS_VALUES, [1e-1, 1e-2, 1e-3]);
    assert_eq!(verify::SEMICONVEX_TOL, SEMICONVEX_TOL);
}
