use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use varfrac::config::ExperimentConfig;
use varfrac::elliptic::{find_barrier, solve, strong_max_principle_check, EllipticProblem, MaxPrincipleVerdict};
use varfrac::geometry::{validate_family, ValidationOptions};
use varfrac::operator::{DiscreteOperator, GridFunction};
use varfrac::parabolic::{decay_rate, evolve, step_rate, weighted_decay_check, Trajectory};
use varfrac::spectral::{check_simplicity, principal_eigen, probe_e, EigenOptions, ProbeOutcome, SpectralResult};
use varfrac::verify::{run_all, ORACLE_TOL};
use varfrac::vistools::{control_ratio, inf_convolve, semiconvexity_check, sup_convolve};
use varfrac::{Error, Result};

use crate::manifest::Run;
use crate::report::{node_fields, num, write_summary, Csv};

/// Failed checks; a nonempty list maps to exit code 3.
pub type Failures = Vec<String>;

/// Relative slack on `u ≤ Q d^η`.
const BARRIER_SLACK: f64 = 1e-9;

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub op: &'a DiscreteOperator,
}

fn dump(path: &Path, hash: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config_sha256={hash}")?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn nodal(run: &Run, name: &str, op: &DiscreteOperator, columns: &[&str], values: &[&GridFunction]) -> Result<()> {
    let mut header = vec!["node", "x", "y"];
    header.extend_from_slice(columns);
    let mut csv = Csv::create(&run.output(name), run.hash(), &header)?;
    for &k in op.grid().interior() {
        let mut row: Vec<String> = node_fields(op.grid(), k).into();
        row.extend(values.iter().map(|u| num(u.get(k))));
        csv.row(&row)?;
    }
    csv.finish()
}

pub fn eigen(cfg: &ExperimentConfig, op: &DiscreteOperator) -> Result<SpectralResult> {
    principal_eigen(
        op,
        &EigenOptions {
            tol: cfg.solver.eig_tol,
            max_iter: cfg.solver.eig_max_iter,
            ..EigenOptions::default()
        },
    )
}

fn alpha(cfg: &ExperimentConfig, op: &DiscreteOperator) -> f64 {
    cfg.operator.alpha.unwrap_or_else(|| op.alpha())
}

pub fn validate_geometry(ctx: &Ctx, run: &mut Run) -> Result<Failures> {
    run.stage("validate-geometry", &["geometry.csv"], |run| {
        let cfg = ctx.cfg;
        let family = cfg.family()?;
        let mut opts = ValidationOptions::default();
        if family.is_time_dependent() {
            opts.times = vec![0.0, 0.5 * cfg.solver.t_max, cfg.solver.t_max];
        }
        let report = validate_family(&family, ctx.op.grid(), &opts);
        dump(&run.output("geometry.csv"), run.hash(), |w| report.write_csv(w))?;
        Ok(report
            .violations()
            .map(|r| format!("geometry check {} failed at node {:?} (value {:e})", r.check, r.node, r.value))
            .collect())
    })
}

pub fn assemble(ctx: &Ctx, run: &mut Run) -> Result<Failures> {
    run.stage("assemble", &["coefficients.csv", "matrix.csv", "assemble_summary.csv"], |run| {
        let op = ctx.op;
        dump(&run.output("coefficients.csv"), run.hash(), |w| op.write_coefficients(w))?;
        dump(&run.output("matrix.csv"), run.hash(), |w| op.write_triplets(w))?;
        let m = op.is_m_matrix();
        write_summary(
            &run.output("assemble_summary.csv"),
            run.hash(),
            &[
                ("unknowns", op.n().to_string()),
                ("storage", if op.weights().is_dense() { "dense" } else { "sparse" }.into()),
                ("nonzeros", op.weights().nnz().to_string()),
                ("alpha", num(op.alpha())),
                ("beta", num(op.beta())),
                ("m_matrix", m.to_string()),
                ("components", op.component_count().to_string()),
            ],
        )?;
        Ok(if m { vec![] } else { vec!["assembled matrix is not an M-matrix".into()] })
    })
}

pub fn solve_elliptic(ctx: &Ctx, run: &mut Run) -> Result<Failures> {
    run.stage("solve-elliptic", &["elliptic.csv", "elliptic_summary.csv"], |run| {
        let (cfg, op) = (ctx.cfg, ctx.op);
        let f = cfg.forcing(op);
        let cert = cfg.forcing_certificate(op, &f)?;
        let mut problem = EllipticProblem::new(op, f.clone());
        problem.certificate = Some(cert);
        let u = solve(&problem)?;
        let barrier = find_barrier(op, alpha(cfg, op), Some(&f))?;
        let ratio = op
            .nodes()
            .iter()
            .fold(0.0f64, |m, &k| m.max(u.get(k).abs() / barrier.values.get(k)));
        let verdict = strong_max_principle_check(op, &u);
        nodal(run, "elliptic.csv", op, &["f", "u", "barrier"], &[&f, &u, &barrier.values])?;
        write_summary(
            &run.output("elliptic_summary.csv"),
            run.hash(),
            &[
                ("eta_f", num(cert.eta_f)),
                ("forcing_constant", num(cert.c)),
                ("barrier_eta", num(barrier.eta)),
                ("barrier_q", num(barrier.q)),
                ("barrier_min_margin", num(barrier.min_margin())),
                ("max_u_over_barrier", num(ratio)),
                ("u_max", num(u.sup_norm())),
                ("max_principle", format!("{verdict:?}")),
            ],
        )?;
        let mut fails = Vec::new();
        if ratio > 1.0 + BARRIER_SLACK {
            fails.push(format!("|u| exceeds the barrier by a factor {ratio}"));
        }
        if matches!(verdict, MaxPrincipleVerdict::Violation { .. }) {
            fails.push(format!("strong maximum principle: {verdict:?}"));
        }
        Ok(fails)
    })
}

pub fn eig(ctx: &Ctx, run: &mut Run) -> Result<Failures> {
    run.stage("eig", &["eigenfunction.csv", "eig_summary.csv"], |run| {
        let (cfg, op) = (ctx.cfg, ctx.op);
        let r = eigen(cfg, op)?;
        let simp = check_simplicity(&r, op);
        let rel = r.oracle_lambda.map(|o| (r.lambda - o).abs() / o.abs());
        nodal(run, "eigenfunction.csv", op, &["phi"], &[&r.eigenfunction])?;
        let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "NA".into());
        write_summary(
            &run.output("eig_summary.csv"),
            run.hash(),
            &[
                ("lambda", num(r.lambda)),
                ("oracle_lambda", opt(r.oracle_lambda)),
                ("relative_error", opt(rel)),
                ("tolerance", num(ORACLE_TOL)),
                ("iterations", r.iterations.to_string()),
                ("min_eigenfunction", num(r.min_value)),
                ("gap", opt(r.gap)),
                ("rank_deficiency", simp.rank_deficiency.to_string()),
                ("fit_residual", num(simp.fit_residual)),
            ],
        )?;
        let mut fails = Vec::new();
        match rel {
            Some(rel) if rel > ORACLE_TOL => {
                fails.push(format!("eigenvalue {} disagrees with the dense oracle (relative {rel:e})", r.lambda))
            }
            None => fails.push("dense oracle unavailable for this grid".into()),
            _ => {}
        }
        if !(r.min_value > 0.0) {
            fails.push(format!("eigenfunction not positive (min {:e})", r.min_value));
        }
        if !simp.simple {
            fails.push(format!("eigenvalue not simple (rank deficiency {})", simp.rank_deficiency));
        }
        Ok(fails)
    })
}

pub struct ProbeArgs {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub steps: Option<usize>,
}

pub fn probe(ctx: &Ctx, run: &mut Run, args: &ProbeArgs) -> Result<Failures> {
    run.stage("probe-e", &["probe.csv", "probe_summary.csv"], |run| {
        let (cfg, op) = (ctx.cfg, ctx.op);
        let lb = eigen(cfg, op)?.lambda;
        let lo = args.lambda_min.unwrap_or(cfg.solver.lambda_min);
        let hi = args.lambda_max.or(cfg.solver.lambda_max).unwrap_or(2.0 * lb);
        let n = args.steps.unwrap_or(cfg.solver.lambda_steps);
        if n < 2 || !(hi > lo) {
            return Err(Error::config_key("steps", "the probe needs at least two values and lambda_max > lambda_min"));
        }
        let lambdas: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        let f = cfg.forcing(op);
        let p = probe_e(op, &f, &lambdas, None);
        let mut csv = Csv::create(&run.output("probe.csv"), run.hash(), &["lambda", "outcome", "norm"])?;
        for ((l, o), nrm) in p.lambdas.iter().zip(&p.outcomes).zip(&p.norms) {
            let o = match o {
                ProbeOutcome::SolvablePositive => "solvable_positive",
                ProbeOutcome::BlownUp => "blown_up",
                ProbeOutcome::Failed => "failed",
            };
            csv.row([num(*l), o.into(), num(*nrm)])?;
        }
        csv.finish()?;
        let contains = p.bracket.map(|(a, b)| a < lb && lb <= b);
        let fmt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "NA".into());
        write_summary(
            &run.output("probe_summary.csv"),
            run.hash(),
            &[
                ("lambda_bar", num(lb)),
                ("bracket_low", fmt(p.bracket.map(|b| b.0))),
                ("bracket_high", fmt(p.bracket.map(|b| b.1))),
                ("contains_lambda_bar", contains.map(|c| c.to_string()).unwrap_or_else(|| "NA".into())),
                ("monotone", p.monotone.to_string()),
                ("cap", num(p.cap)),
            ],
        )?;
        let mut fails = Vec::new();
        if !p.monotone {
            fails.push("probe outcomes are not a monotone left semiline".into());
        }
        // a grid that straddles λ̄ must bracket it
        if lo < lb && lb <= hi && contains != Some(true) {
            fails.push(format!("bracket {:?} misses lambda_bar {lb}", p.bracket));
        }
        Ok(fails)
    })
}

fn trajectory(ctx: &Ctx, lambda_bar: Option<f64>) -> Result<Trajectory> {
    let (cfg, op) = (ctx.cfg, ctx.op);
    let f = cfg.forcing(op);
    let stationary = if cfg.problem.u0 == "stationary" {
        Some(solve(&EllipticProblem::new(op, f.clone()))?)
    } else {
        None
    };
    let u0 = cfg.initial(op, stationary.as_ref())?;
    let problem = cfg.parabolic(op, f, u0, lambda_bar)?;
    info!("evolving {} unknowns with dt = {}", op.n(), problem.dt);
    evolve(&problem)
}

fn write_trajectory(run: &Run, name: &str, traj: &Trajectory) -> Result<()> {
    let mut csv = Csv::create(&run.output(name), run.hash(), &["t", "distance"])?;
    for (t, d) in traj.times.iter().zip(&traj.distances) {
        csv.row([num(*t), num(*d)])?;
    }
    csv.finish()
}

pub fn solve_parabolic(ctx: &Ctx, run: &mut Run) -> Result<Failures> {
    run.stage(
        "solve-parabolic",
        &["trajectory.csv", "final.csv", "parabolic_summary.csv"],
        |run| {
            let lb = match ctx.cfg.problem.decay_fraction {
                Some(_) => Some(eigen(ctx.cfg, ctx.op)?.lambda),
                None => None,
            };
            let traj = trajectory(ctx, lb)?;
            write_trajectory(run, "trajectory.csv", &traj)?;
            let last = traj.snapshots.last().expect("trajectory keeps the final stamp");
            nodal(run, "final.csv", ctx.op, &["u", "v"], &[last, &traj.stationary])?;
            write_summary(
                &run.output("parabolic_summary.csv"),
                run.hash(),
                &[
                    ("steps", traj.steps.to_string()),
                    ("final_time", num(*traj.times.last().unwrap_or(&0.0))),
                    ("final_distance", num(*traj.distances.last().unwrap_or(&0.0))),
                    ("reached_stationary", traj.reached_stationary.to_string()),
                ],
            )?;
            Ok(vec![])
        },
    )
}

pub fn decay(ctx: &Ctx, run: &mut Run, window: Option<(f64, f64)>) -> Result<Failures> {
    run.stage("decay-rate", &["decay.csv", "decay_summary.csv"], |run| {
        let (cfg, op) = (ctx.cfg, ctx.op);
        let lb = eigen(cfg, op)?.lambda;
        let traj = trajectory(ctx, Some(lb))?;
        let end = *traj.times.last().unwrap_or(&0.0);
        let (t0, t1) = window
            .or(cfg.solver.window_start.zip(cfg.solver.window_end))
            .unwrap_or((0.4 * end, 0.8 * end));
        let fit = decay_rate(&traj, &traj.stationary, (t0, t1))?;
        let mut csv = Csv::create(&run.output("decay.csv"), run.hash(), &["t", "distance", "in_window"])?;
        for (t, d) in traj.times.iter().zip(&traj.distances) {
            csv.row([num(*t), num(*d), (t0 <= *t && *t <= t1).to_string()])?;
        }
        csv.finish()?;
        let data_rate = cfg.decay_rate(Some(lb))?;
        let mut rows = vec![
            ("window_start", num(t0)),
            ("window_end", num(t1)),
            ("rate", num(fit.rate)),
            ("intercept", num(fit.intercept)),
            ("points", fit.points.to_string()),
            ("lambda_bar", num(lb)),
            ("step_rate", num(step_rate(lb, cfg.solver.dt))),
        ];
        if let Some(rate) = data_rate {
            let eta = find_barrier(op, alpha(cfg, op), None)?.eta;
            let w = weighted_decay_check(&traj, &traj.stationary, eta, rate.min(lb));
            rows.push(("data_rate", num(rate)));
            rows.push(("weighted_eta", num(eta)));
            rows.push(("weighted_constant", num(w.c)));
            rows.push(("weighted_stable", w.stable.to_string()));
        }
        write_summary(&run.output("decay_summary.csv"), run.hash(), &rows)?;
        Ok(vec![])
    })
}

pub struct SupconvArgs<'a> {
    pub eps: Option<f64>,
    pub input: Option<&'a Path>,
    pub column: &'a str,
}

/// Reads `column` by `node` from a CSV written by another subcommand; nodes
/// not listed are zero.
fn read_nodal(path: &Path, column: &str, op: &DiscreteOperator) -> Result<GridFunction> {
    let bad = |msg: String| Error::config_key("in", msg);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("{} has no `{name}` column", path.display())))
    };
    let (ni, vi) = (col("node")?, col(column)?);
    let mut u = GridFunction::zeros(op.grid());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let node: usize = rec[ni].parse().map_err(|e| bad(format!("bad node `{}`: {e}", &rec[ni])))?;
        let v: f64 = rec[vi].parse().map_err(|e| bad(format!("bad value `{}`: {e}", &rec[vi])))?;
        if node >= u.len() {
            return Err(bad(format!("node {node} is off the grid")));
        }
        u.values_mut()[node] = v;
    }
    Ok(u)
}

pub fn supconv(ctx: &Ctx, run: &mut Run, args: &SupconvArgs) -> Result<Failures> {
    run.stage("supconv", &["supconv.csv", "supconv_summary.csv"], |run| {
        let (cfg, op) = (ctx.cfg, ctx.op);
        let eps = args.eps.unwrap_or(cfg.solver.eps);
        let u = match args.input {
            Some(path) => read_nodal(path, args.column, op)?,
            None => solve(&EllipticProblem::new(op, cfg.forcing(op)))?,
        };
        let grid = op.grid();
        let sup = sup_convolve(grid, &u, eps)?;
        let inf = inf_convolve(grid, &u, eps)?;
        let mut csv = Csv::create(
            &run.output("supconv.csv"),
            run.hash(),
            &["node", "x", "y", "u", "sup", "inf", "argmax", "argmin"],
        )?;
        for k in 0..grid.len() {
            let mut row: Vec<String> = node_fields(grid, k).into();
            row.extend([
                num(u.get(k)),
                num(sup.values.get(k)),
                num(inf.values.get(k)),
                sup.argopt[k].to_string(),
                inf.argopt[k].to_string(),
            ]);
            csv.row(&row)?;
        }
        csv.finish()?;
        let semi = semiconvexity_check(grid, &sup, 1e-9);
        let (cs, ci) = (control_ratio(grid, &u, &sup), control_ratio(grid, &u, &inf));
        write_summary(
            &run.output("supconv_summary.csv"),
            run.hash(),
            &[
                ("eps", num(eps)),
                ("control_ratio_sup", num(cs)),
                ("control_ratio_inf", num(ci)),
                ("min_second_difference", num(semi.min_second_difference)),
                ("semiconvexity_bound", num(semi.bound)),
                ("semiconvex", semi.pass.to_string()),
            ],
        )?;
        let mut fails = Vec::new();
        if cs > 1.0 || ci > 1.0 {
            fails.push(format!("control estimate exceeded: {cs}, {ci}"));
        }
        if !semi.pass {
            fails.push(format!("sup-convolution not semiconvex at node {}", semi.node));
        }
        Ok(fails)
    })
}

pub fn verify_all(ctx: &Ctx, run: &mut Run) -> Result<Failures> {
    run.stage("verify-all", &["verify.csv"], |run| {
        let outcomes = run_all(ctx.cfg);
        let mut csv = Csv::create(&run.output("verify.csv"), run.hash(), &["criterion", "name", "pass", "detail"])?;
        let mut fails = Vec::new();
        for o in &outcomes {
            println!("{}", o.line());
            csv.row([o.id.to_string(), o.name.to_string(), o.pass.to_string(), o.detail.clone()])?;
            if !o.pass {
                fails.push(format!("criterion {} ({})", o.id, o.name));
            }
        }
        csv.finish()?;
        let passed = outcomes.len() - fails.len();
        println!("summary: {passed}/{} criteria passed", outcomes.len());
        Ok(fails)
    })
}
