//! Principal eigenvalue by the forced inverse iteration, a dense oracle, the
//! simplicity check and the probe of the set E.

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{sup_norm, LinearSolver};
use crate::operator::{DiscreteOperator, GridFunction};

/// Largest system handed to the dense oracle.
pub const ORACLE_MAX_N: usize = 4000;

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub lambda: f64,
    /// Positive, max-norm 1.
    pub eigenfunction: GridFunction,
    /// λ estimate after every step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Minimum of the eigenfunction over the unknowns.
    pub min_value: f64,
    /// Distance from λ̄ to the next eigenvalue by real part (dense oracle).
    pub gap: Option<f64>,
    pub oracle_lambda: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Nonnegative forcing per unknown; ones when absent.
    pub forcing: Option<Vec<f64>>,
    /// Run the dense oracle (skipped with a warning above [`ORACLE_MAX_N`]).
    pub oracle: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-12,
            max_iter: 1000,
            forcing: None,
            oracle: true,
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    // first index wins ties
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Iterates `v_n = A^{-1}(λ_{n−1} u_{n−1} + ε_n λ_{n−1} f̂)` from `v_1 = A^{-1} f̂`,
/// with `u_n = v_n / ‖v_n‖_∞`, `λ_n = rhs(x*)/v_n(x*)` at the argmax `x*` and
/// forcing weights `ε_n = 10^{-n}`. Stops once successive λ agree to `tol` and
/// the forcing has died out.
pub fn principal_eigen(op: &DiscreteOperator, opts: &EigenOptions) -> Result<SpectralResult> {
    let n = op.n();
    let f: Vec<f64> = match &opts.forcing {
        Some(f) => {
            if f.len() != n || f.iter().any(|v| *v < 0.0) || f.iter().all(|v| *v == 0.0) {
                return Err(Error::config_key("forcing", "eigen forcing must be nonnegative and nontrivial"));
            }
            let m = sup_norm(f);
            f.iter().map(|v| v / m).collect()
        }
        None => vec![1.0; n],
    };
    let solver = LinearSolver::new(op.system(0.0))?;
    let mut v = solver.solve(&f)?;
    let mut k = argmax(&v);
    let mut lambda = f[k] / v[k];
    let mut u: Vec<f64> = v.iter().map(|x| x / v[k]).collect();
    let mut trace = vec![lambda];
    let mut last_change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let eps = 10f64.powi(-(it.min(300) as i32));
        let rhs: Vec<f64> = u.iter().zip(&f).map(|(u, f)| lambda * (u + eps * f)).collect();
        v = solver.solve(&rhs)?;
        k = argmax(&v);
        if !(v[k] > 0.0) {
            return Err(Error::numerical("iterate lost positivity", v[k]));
        }
        let lambda_new = rhs[k] / v[k];
        let u_new: Vec<f64> = v.iter().map(|x| x / v[k]).collect();
        last_change = (lambda_new - lambda).abs() / lambda_new.abs();
        lambda = lambda_new;
        u = u_new;
        trace.push(lambda);
        if last_change <= opts.tol && eps <= opts.tol {
            // report the unforced quotient of the converged iterate
            let au = op.apply(&u);
            let k = argmax(&u);
            let lambda = au[k] / u[k];
            let min_value = u.iter().copied().fold(f64::INFINITY, f64::min);
            let mut res = SpectralResult {
                lambda,
                eigenfunction: op.extend(&u),
                trace,
                iterations: it,
                min_value,
                gap: None,
                oracle_lambda: None,
            };
            if opts.oracle {
                if let Some(sp) = dense_oracle(op) {
                    res.gap = Some(sp.gap);
                    res.oracle_lambda = Some(sp.lambda);
                }
            }
            return Ok(res);
        }
    }
    Err(Error::SpectralNonConvergence {
        iterations: opts.max_iter,
        last_change,
    })
}

#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    /// Real part of the eigenvalue with smallest real part.
    pub lambda: f64,
    /// Its imaginary part (zero for an M-matrix up to round-off).
    pub imag: f64,
    pub gap: f64,
    /// `(re, im)` sorted by real part.
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Full nonsymmetric eigendecomposition (real Schur form). `None` above
/// [`ORACLE_MAX_N`] unknowns.
pub fn dense_oracle(op: &DiscreteOperator) -> Option<DenseSpectrum> {
    if op.n() > ORACLE_MAX_N {
        warn!("dense spectral oracle skipped for n = {}", op.n());
        return None;
    }
    Some(spectrum_of(&op.to_dense()))
}

pub fn spectrum_of(m: &DMatrix<f64>) -> DenseSpectrum {
    let ev = m.complex_eigenvalues();
    let mut eigenvalues: Vec<(f64, f64)> = ev.iter().map(|c| (c.re, c.im)).collect();
    eigenvalues.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.abs().total_cmp(&b.1.abs())));
    let (lambda, imag) = eigenvalues[0];
    let gap = eigenvalues.get(1).map(|e| e.0 - lambda).unwrap_or(f64::INFINITY);
    DenseSpectrum {
        lambda,
        imag,
        gap,
        eigenvalues,
    }
}

#[derive(Clone, Debug)]
pub struct SimplicityReport {
    /// Number of singular values of `A − λ̄I` below the rank threshold.
    pub rank_deficiency: usize,
    /// The three smallest singular values, ascending.
    pub smallest_singular: Vec<f64>,
    pub threshold: f64,
    /// `‖φ̄ − t v‖_∞` for the best scalar `t`, `v` the oracle null vector.
    pub fit_residual: f64,
    pub simple: bool,
}

/// Relative rank threshold on the singular values of `A − λ̄I`.
pub const RANK_TOL: f64 = 1e-9;

pub fn check_simplicity(result: &SpectralResult, op: &DiscreteOperator) -> SimplicityReport {
    let mut m = op.to_dense();
    for i in 0..op.n() {
        m[(i, i)] -= result.lambda;
    }
    let svd = m.svd(false, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv.last().copied().unwrap_or(0.0);
    let threshold = RANK_TOL * smax;
    let rank_deficiency = sv.iter().filter(|s| **s <= threshold).count();
    let v_t = svd.v_t.expect("right singular vectors requested");
    let null: Vec<f64> = v_t.row(order[0]).iter().copied().collect();
    let phi = op.restrict(&result.eigenfunction);
    let t = phi.iter().zip(&null).map(|(a, b)| a * b).sum::<f64>() / null.iter().map(|b| b * b).sum::<f64>();
    let fit_residual = phi.iter().zip(&null).fold(0.0f64, |m, (a, b)| m.max((a - t * b).abs()));
    SimplicityReport {
        rank_deficiency,
        smallest_singular: sv.iter().take(3).copied().collect(),
        threshold,
        fit_residual,
        simple: rank_deficiency == 1 && fit_residual <= 1e-8,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeOutcome {
    SolvablePositive,
    /// `‖v‖_∞` exceeded the cap.
    BlownUp,
    /// No solution, or a solution that is not positive.
    Failed,
}

#[derive(Clone, Debug)]
pub struct ESetProbe {
    pub lambdas: Vec<f64>,
    pub outcomes: Vec<ProbeOutcome>,
    /// `‖v_λ‖_∞` where a solve succeeded, NaN otherwise.
    pub norms: Vec<f64>,
    pub cap: f64,
    /// Last solvable λ and first non-solvable λ.
    pub bracket: Option<(f64, f64)>,
    /// Outcomes form a left semiline and norms grow along it.
    pub monotone: bool,
}

/// Default blow-up cap relative to `‖f‖_∞`.
pub const PROBE_CAP_FACTOR: f64 = 1e6;

/// Attempts `(A − λI) v = f` for every λ (in increasing order) and classifies
/// the result.
pub fn probe_e(op: &DiscreteOperator, f: &GridFunction, lambdas: &[f64], cap: Option<f64>) -> ESetProbe {
    let b = op.restrict(f);
    let cap = cap.unwrap_or(PROBE_CAP_FACTOR * sup_norm(&b));
    let results: Vec<(ProbeOutcome, f64)> = lambdas
        .par_iter()
        .map(|&lambda| {
            let v = LinearSolver::new(op.system(lambda)).and_then(|s| s.solve(&b));
            match v {
                Err(_) => (ProbeOutcome::Failed, f64::NAN),
                Ok(v) => {
                    let norm = sup_norm(&v);
                    if !norm.is_finite() || norm > cap {
                        (ProbeOutcome::BlownUp, norm)
                    } else if v.iter().all(|x| *x > 0.0) {
                        (ProbeOutcome::SolvablePositive, norm)
                    } else {
                        (ProbeOutcome::Failed, norm)
                    }
                }
            }
        })
        .collect();
    let outcomes: Vec<ProbeOutcome> = results.iter().map(|r| r.0).collect();
    let norms: Vec<f64> = results.iter().map(|r| r.1).collect();
    let first_bad = outcomes.iter().position(|o| *o != ProbeOutcome::SolvablePositive);
    let bracket = match first_bad {
        Some(k) if k > 0 => Some((lambdas[k - 1], lambdas[k])),
        Some(_) => Some((f64::NEG_INFINITY, lambdas[0])),
        None => None,
    };
    let prefix = first_bad.unwrap_or(lambdas.len());
    let semiline = outcomes[prefix..].iter().all(|o| *o != ProbeOutcome::SolvablePositive);
    let growing = norms[..prefix].windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    ESetProbe {
        lambdas: lambdas.to_vec(),
        outcomes,
        norms,
        cap,
        bracket,
        monotone: semiline && growing,
    }
}

/// Solves `(A − λI) u = f` for `λ < λ̄`, cross-checked by the fixed point
/// `v_n = A^{-1}(λ v_{n−1} + f)` started from two different iterates.
pub fn solve_below_lambda(op: &DiscreteOperator, lambda: f64, f: &GridFunction, lambda_bar: f64) -> Result<GridFunction> {
    if !(lambda < lambda_bar) {
        return Err(Error::SpectralShift { lambda, lambda_bar });
    }
    let b = op.restrict(f);
    let u = LinearSolver::new(op.system(lambda))?.solve(&b)?;
    let ratio = lambda.abs() / lambda_bar;
    if ratio < 1.0 && lambda != 0.0 {
        let base = LinearSolver::new(op.system(0.0))?;
        let iters = ((1e-13f64.ln() / ratio.ln()).ceil() as usize + 20).min(20_000);
        let scale = sup_norm(&u).max(f64::MIN_POSITIVE);
        let starts = [vec![0.0; op.n()], b.iter().zip(op.h()).map(|(b, h)| 10.0 * b / h).collect()];
        for start in starts {
            let mut v = start;
            for _ in 0..iters {
                let rhs: Vec<f64> = v.iter().zip(&b).map(|(v, b)| lambda * v + b).collect();
                v = base.solve(&rhs)?;
            }
            let diff = v.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if diff > 1e-8 * scale {
                return Err(Error::numerical("fixed-point iterate disagrees with the direct solve", diff / scale));
            }
        }
    }
    Ok(op.extend(&u))
}
