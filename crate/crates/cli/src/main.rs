#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod manifest;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use varfrac::config::ExperimentConfig;
use varfrac::{Error, Result};

use commands::{Ctx, Failures, ProbeArgs, SupconvArgs};
use manifest::{code_version, sha256_hex, Run, RunManifest};

#[derive(Parser)]
#[command(name = "varfrac", version, about = "Experiments with nonlocal operators on variable domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Output directory; defaults to `[outputs] dir` of the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural assumptions on the domain family.
    ValidateGeometry(Common),
    /// Assemble A = diag(h) + L and dump coefficients and matrix.
    Assemble(Common),
    /// Solve the Dirichlet problem and check the barrier bound.
    SolveElliptic(Common),
    /// Principal eigenvalue, compared with the dense oracle.
    Eig(Common),
    /// Solvability probe of the shifted problem over a λ grid.
    ProbeE {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Implicit Euler run to the configured horizon.
    SolveParabolic(Common),
    /// Fitted decay rate of ‖u(t) − v‖ over a time window.
    DecayRate {
        #[command(flatten)]
        common: Common,
        /// `t0:t1`.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Sup/inf-convolution of a nodal function.
    Supconv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        /// CSV with `node` and value columns; the elliptic solution when absent.
        #[arg(long = "in", value_name = "CSV")]
        input: Option<PathBuf>,
        #[arg(long, default_value = "u")]
        column: String,
    },
    /// Every acceptance criterion, with a pass/fail summary.
    VerifyAll(Common),
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected t0:t1")?;
    let t0: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let t1: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(t0 >= 0.0 && t1 > t0) {
        return Err("need 0 <= t0 < t1".into());
    }
    Ok((t0, t1))
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::ValidateGeometry(c)
            | Command::Assemble(c)
            | Command::SolveElliptic(c)
            | Command::Eig(c)
            | Command::SolveParabolic(c)
            | Command::VerifyAll(c) => c,
            Command::ProbeE { common, .. } | Command::DecayRate { common, .. } | Command::Supconv { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::ValidateGeometry(_) => "validate-geometry",
            Command::Assemble(_) => "assemble",
            Command::SolveElliptic(_) => "solve-elliptic",
            Command::Eig(_) => "eig",
            Command::ProbeE { .. } => "probe-e",
            Command::SolveParabolic(_) => "solve-parabolic",
            Command::DecayRate { .. } => "decay-rate",
            Command::Supconv { .. } => "supconv",
            Command::VerifyAll(_) => "verify-all",
        }
    }
}

fn error_line(code: u8, kind: &str, key: Option<&str>, message: &str) {
    eprintln!("varfrac-error: {}", json!({ "code": code, "kind": kind, "key": key, "message": message }));
}

fn run(cmd: &Command) -> Result<Failures> {
    let common = cmd.common();
    let text = std::fs::read(&common.config)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", common.config.display())))?;
    let cfg = ExperimentConfig::load(&common.config)?;
    let dir = common.out.clone().unwrap_or_else(|| cfg.outputs.dir.clone());
    let mut run = Run::create(
        &dir,
        RunManifest {
            command: cmd.name().into(),
            config: common.config.display().to_string(),
            config_sha256: sha256_hex(&text),
            version: code_version(),
            seed: cfg.solver.seed,
            stages: Vec::new(),
        },
    )?;
    // certificates are re-checked against the assembled operator before any stage
    let op = run.stage("load", &[], |_| {
        let op = cfg.operator()?;
        cfg.forcing_certificate(&op, &cfg.forcing(&op))?;
        Ok(op)
    })?;
    let ctx = Ctx { cfg: &cfg, op: &op };
    match cmd {
        Command::ValidateGeometry(_) => commands::validate_geometry(&ctx, &mut run),
        Command::Assemble(_) => commands::assemble(&ctx, &mut run),
        Command::SolveElliptic(_) => commands::solve_elliptic(&ctx, &mut run),
        Command::Eig(_) => commands::eig(&ctx, &mut run),
        Command::ProbeE {
            lambda_min,
            lambda_max,
            steps,
            ..
        } => commands::probe(
            &ctx,
            &mut run,
            &ProbeArgs {
                lambda_min: *lambda_min,
                lambda_max: *lambda_max,
                steps: *steps,
            },
        ),
        Command::SolveParabolic(_) => commands::solve_parabolic(&ctx, &mut run),
        Command::DecayRate { window, .. } => commands::decay(&ctx, &mut run, *window),
        Command::Supconv { eps, input, column, .. } => commands::supconv(
            &ctx,
            &mut run,
            &SupconvArgs {
                eps: *eps,
                input: input.as_deref().map(Path::new),
                column,
            },
        ),
        Command::VerifyAll(_) => commands::verify_all(&ctx, &mut run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            error_line(1, "usage", None, e.kind().as_str().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    match run(&cli.command) {
        Ok(fails) if fails.is_empty() => ExitCode::SUCCESS,
        Ok(fails) => {
            for f in &fails {
                eprintln!("{f}");
            }
            error_line(3, "acceptance", None, &fails.join("; "));
            ExitCode::from(3)
        }
        Err(e) => {
            let code = e.exit_code() as u8;
            let key = match &e {
                Error::Config { key, .. } => key.as_deref(),
                _ => None,
            };
            error_line(code, e.kind(), key, &e.to_string());
            ExitCode::from(code)
        }
    }
}
