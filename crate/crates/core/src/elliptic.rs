//! Dirichlet solves, barriers `Q d^η`, comparison and the strong maximum principle.

use crate::error::{Error, Result};
use crate::linalg::{sup_norm, LinearSolver};
use crate::operator::{DiscreteOperator, GridFunction};

/// `|f(x)| d(x)^{2s−η_f} ≤ C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForcingCertificate {
    pub eta_f: f64,
    pub c: f64,
}

impl ForcingCertificate {
    /// Checks the certificate nodewise over the operator's unknowns.
    pub fn verify(&self, op: &DiscreteOperator, f: &GridFunction) -> Result<()> {
        let two_s = 2.0 * op.params().s();
        if !(self.eta_f > 0.0 && self.eta_f < two_s) {
            return Err(Error::config_key("eta_f", format!("forcing exponent {} must lie in (0, 2s)", self.eta_f)));
        }
        let worst = tightest_constant(op, f, self.eta_f);
        if worst > self.c * (1.0 + 1e-12) {
            return Err(Error::config_key(
                "f_c",
                format!("forcing certificate fails: max |f| d^(2s-eta_f) = {worst} > {}", self.c),
            ));
        }
        Ok(())
    }
}

/// Smallest `C` with `|f| d^{2s−η} ≤ C` on the unknowns.
pub fn tightest_constant(op: &DiscreteOperator, f: &GridFunction, eta: f64) -> f64 {
    let two_s = 2.0 * op.params().s();
    op.nodes()
        .iter()
        .zip(op.dist())
        .fold(0.0, |m, (&k, d)| m.max(f.get(k).abs() * d.powf(two_s - eta)))
}

#[derive(Clone, Debug)]
pub struct EllipticProblem<'a> {
    pub op: &'a DiscreteOperator,
    pub f: GridFunction,
    /// Spectral shift λ; the system solved is `(A − λI) u = f`.
    pub lambda: f64,
    /// Known principal eigenvalue, which licenses shifts past the dominance margin.
    pub lambda_bar: Option<f64>,
    pub certificate: Option<ForcingCertificate>,
}

impl<'a> EllipticProblem<'a> {
    pub fn new(op: &'a DiscreteOperator, f: GridFunction) -> Self {
        EllipticProblem {
            op,
            f,
            lambda: 0.0,
            lambda_bar: None,
            certificate: None,
        }
    }
}

/// Solves `(A − λI) u = f` to relative residual `1e-10`.
pub fn solve(problem: &EllipticProblem) -> Result<GridFunction> {
    let op = problem.op;
    if let Some(cert) = &problem.certificate {
        cert.verify(op, &problem.f)?;
    }
    let lambda = problem.lambda;
    let licensed = op.dominance_margin(lambda) > 0.0 || problem.lambda_bar.is_some_and(|lb| lambda < lb);
    if !licensed {
        return Err(Error::SpectralShift {
            lambda,
            lambda_bar: problem.lambda_bar.unwrap_or(f64::NAN),
        });
    }
    let b = op.restrict(&problem.f);
    let u = LinearSolver::new(op.system(lambda))?.solve(&b)?;
    Ok(op.extend(&u))
}

/// `Q d^η` together with the residual margin of `d^η`.
#[derive(Clone, Debug)]
pub struct Barrier {
    pub eta: f64,
    pub q: f64,
    /// `Q d^η` on the grid.
    pub values: GridFunction,
    /// Per unknown: `α d^{-2s} d^η + L(d^η) − (α/2) d^{η−2s}`.
    pub margin: Vec<f64>,
    pub alpha: f64,
    /// `(η, min margin, worst unknown)` for every exponent tried.
    pub search: Vec<(f64, f64, usize)>,
}

impl Barrier {
    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Number of dyadic levels searched below `s`.
pub const BARRIER_LEVELS: usize = 30;

/// Margins of `d^η` at every unknown.
pub fn barrier_margin(op: &DiscreteOperator, alpha: f64, eta: f64) -> Vec<f64> {
    let two_s = 2.0 * op.params().s();
    let b: Vec<f64> = op.dist().iter().map(|d| d.powf(eta)).collect();
    let lb = op.apply_l(&b);
    op.dist()
        .iter()
        .zip(&b)
        .zip(lb)
        .map(|((d, b), l)| alpha * d.powf(-two_s) * b + l - 0.5 * alpha * d.powf(eta - two_s))
        .collect()
}

/// Admissible levels skipped before an exponent is returned. The grid resolves
/// the boundary layer of `L[d^η]` only partly, so the first admissible level
/// can fail after refinement.
pub const BARRIER_SAFETY_LEVELS: usize = 1;

/// Searches η ∈ {s, s/2, s/4, …} from the top and returns the exponent
/// [`BARRIER_SAFETY_LEVELS`] admissible levels below the first one with a
/// nonnegative margin everywhere. `Q` is chosen so that
/// `Q (α/2) d^{η−2s} ≥ |f|` when a forcing is given, else `Q = 1`.
pub fn find_barrier(op: &DiscreteOperator, alpha: f64, f: Option<&GridFunction>) -> Result<Barrier> {
    if !(alpha > 0.0) {
        return Err(Error::config_key("alpha", format!("lower coefficient bound {alpha} must be positive")));
    }
    let s = op.params().s();
    let two_s = 2.0 * s;
    let mut search = Vec::new();
    let mut worst = (0usize, f64::NEG_INFINITY);
    let mut admissible = 0;
    // reported from the smallest exponent tried
    for level in 0..BARRIER_LEVELS {
        let eta = s * 0.5f64.powi(level as i32);
        let margin = barrier_margin(op, alpha, eta);
        let (wi, wm) = margin
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, m)| if *m < acc.1 { (i, *m) } else { acc });
        search.push((eta, wm, wi));
        // the margin is scale-free in d^η; compare against the size of the kept term
        let scale = 0.5 * alpha * op.dist().iter().fold(0.0f64, |m, d| m.max(d.powf(eta - two_s)));
        if wm >= -1e-13 * scale && admissible < BARRIER_SAFETY_LEVELS {
            admissible += 1;
            worst = (wi, wm);
            continue;
        }
        if wm >= -1e-13 * scale {
            let q = match f {
                Some(f) => op
                    .nodes()
                    .iter()
                    .zip(op.dist())
                    .fold(0.0f64, |m, (&k, d)| m.max(f.get(k).abs() / (0.5 * alpha * d.powf(eta - two_s)))),
                None => 1.0,
            };
            let values = op.extend(&op.dist().iter().map(|d| q * d.powf(eta)).collect::<Vec<_>>());
            return Ok(Barrier {
                eta,
                q,
                values,
                margin,
                alpha,
                search,
            });
        }
        worst = (wi, wm);
    }
    Err(Error::BarrierFailure {
        worst_node: op.nodes()[worst.0],
        margin: worst.1,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum ComparisonOutcome {
    Holds { min_gap: f64 },
    Violated { node: usize, amount: f64 },
    /// Preconditions failed; the pair says nothing about comparison.
    Rejected { reason: String, node: usize },
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub outcome: ComparisonOutcome,
    /// Largest violation of `A u_sub ≤ f` or `A v_super ≥ f`.
    pub residual_slack: f64,
}

impl ComparisonReport {
    pub fn holds(&self) -> bool {
        matches!(self.outcome, ComparisonOutcome::Holds { .. })
    }
}

/// Checks `u_sub ≤ v_super` on the unknowns given `A u_sub ≤ f ≤ A v_super`
/// and ordering off the unknowns. Tolerances are relative to the data scale.
pub fn check_comparison(
    op: &DiscreteOperator,
    u_sub: &GridFunction,
    v_super: &GridFunction,
    f: &GridFunction,
) -> ComparisonReport {
    let u = op.restrict(u_sub);
    let v = op.restrict(v_super);
    let fv = op.restrict(f);
    let au = op.apply(&u);
    let av = op.apply(&v);
    let diag = op.diagonal();
    let scale = |i: usize| fv[i].abs() + diag[i] * (u[i].abs() + v[i].abs());
    let mut slack = 0.0f64;
    let mut reject: Option<(String, usize)> = None;
    for i in 0..op.n() {
        let tol = 1e-9 * scale(i);
        let su = au[i] - fv[i];
        let sv = fv[i] - av[i];
        slack = slack.max(su).max(sv);
        if reject.is_none() && (su > tol || sv > tol) {
            let which = if su > tol { "A u_sub > f" } else { "A v_super < f" };
            reject = Some((which.to_string(), op.nodes()[i]));
        }
    }
    if reject.is_none() {
        let grid = op.grid();
        let scale = u_sub.sup_norm().max(v_super.sup_norm()).max(1.0);
        for k in 0..grid.len() {
            if op.unknown_of(k).is_none() && u_sub.get(k) > v_super.get(k) + 1e-12 * scale {
                reject = Some(("boundary data not ordered".to_string(), k));
                break;
            }
        }
    }
    if let Some((reason, node)) = reject {
        return ComparisonReport {
            outcome: ComparisonOutcome::Rejected { reason, node },
            residual_slack: slack,
        };
    }
    let tol = 1e-10 * (sup_norm(&u).max(sup_norm(&v)));
    let mut min_gap = f64::INFINITY;
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..op.n() {
        let gap = v[i] - u[i];
        min_gap = min_gap.min(gap);
        if gap < -tol && worst.is_none_or(|w| -gap > w.1) {
            worst = Some((op.nodes()[i], -gap));
        }
    }
    let outcome = match worst {
        Some((node, amount)) => ComparisonOutcome::Violated { node, amount },
        None => ComparisonOutcome::Holds { min_gap },
    };
    ComparisonReport {
        outcome,
        residual_slack: slack,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaxPrincipleVerdict {
    IdenticallyZero,
    StrictlyPositive,
    /// `u` vanishes (or is negative) at `node` while positive values are
    /// reachable from it through the interaction graph.
    Violation { node: usize },
    /// `A u ≥ 0` or `u ≥ 0` off the unknowns fails.
    NotApplicable { node: usize },
}

/// Discrete form of "either u ≡ 0 or u > 0".
pub fn strong_max_principle_check(op: &DiscreteOperator, u: &GridFunction) -> MaxPrincipleVerdict {
    let v = op.restrict(u);
    let scale = u.sup_norm();
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let av = op.apply(&v);
    let diag = op.diagonal();
    for i in 0..op.n() {
        if av[i] < -1e-9 * diag[i] * scale {
            return MaxPrincipleVerdict::NotApplicable { node: op.nodes()[i] };
        }
    }
    for k in 0..op.grid().len() {
        if op.unknown_of(k).is_none() && u.get(k) < -tol {
            return MaxPrincipleVerdict::NotApplicable { node: k };
        }
    }
    if scale == 0.0 || sup_norm(&v) <= tol {
        return MaxPrincipleVerdict::IdenticallyZero;
    }
    if let Some(i) = (0..op.n()).find(|&i| v[i] < -tol) {
        return MaxPrincipleVerdict::Violation { node: op.nodes()[i] };
    }
    for i in 0..op.n() {
        if v[i] <= tol {
            let reach = op.reachable_from(i);
            if (0..op.n()).any(|j| reach[j] && v[j] > tol) {
                return MaxPrincipleVerdict::Violation { node: op.nodes()[i] };
            }
        }
    }
    if v.iter().all(|x| *x > tol) {
        MaxPrincipleVerdict::StrictlyPositive
    } else {
        // zero on whole components disconnected from the positive set
        MaxPrincipleVerdict::IdenticallyZero
    }
}
