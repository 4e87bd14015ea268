//! Sectioned `key = value` experiment configuration.
//!
//! Unknown keys and sections are rejected. Every builder re-validates what it
//! builds, so a config that loads is a config whose certificates hold.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::elliptic::{tightest_constant, ForcingCertificate};
use crate::error::{Error, Result};
use crate::geometry::{
    build_grid, Cone, DomainFamily, DomainSpec, FamilyRule, Grid, Point, RhoLaw, SigmaKind, SigmaSpec, TimeDependence,
};
use crate::operator::{assemble, CoefficientProfile, DiscreteOperator, FracParams, GridFunction, ProfileKind};
use crate::parabolic::{DecayCertificate, Horizon, InitialCertificate, ParabolicProblem, Perturbation};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub family: FamilySection,
    pub operator: OperatorSection,
    #[serde(default)]
    pub problem: ProblemSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// `interval`, `ball`, `polygon` or `l_shape`.
    pub kind: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub dim: Option<usize>,
    /// Flat list `x0, y0, x1, y1, …`.
    pub vertices: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    /// `constant`, `ball_radius`, `star_shaped` or `masked`.
    #[serde(default = "default_rule")]
    pub rule: String,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// `full_space`, `double_cone` or `union_of_cones`.
    #[serde(default = "default_sigma")]
    pub sigma: String,
    #[serde(default)]
    pub sigma_axes: Vec<f64>,
    #[serde(default)]
    pub sigma_half_angles: Vec<f64>,
    #[serde(default = "one")]
    pub q: f64,
    pub rho: Option<f64>,
    pub rho_coef: Option<f64>,
    pub rho_exponent: Option<f64>,
    pub rho_decay_amp: Option<f64>,
    pub rho_decay_rate: Option<f64>,
}

impl Default for FamilySection {
    fn default() -> Self {
        FamilySection {
            rule: default_rule(),
            zeta: default_zeta(),
            sigma: default_sigma(),
            sigma_axes: Vec::new(),
            sigma_half_angles: Vec::new(),
            q: 1.0,
            rho: None,
            rho_coef: None,
            rho_exponent: None,
            rho_decay_amp: None,
            rho_decay_rate: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub s: f64,
    /// `killing`, `kinetic`, `synthetic` or `custom`.
    #[serde(default = "default_profile")]
    pub profile: String,
    pub profile_c: Option<f64>,
    /// Custom profile: one value per line, in grid-node order (`#` lines skipped).
    pub profile_table: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// `zero`, `one` or `distance_power` (`f_amp · d^{η_f − 2s}`).
    #[serde(default = "default_f")]
    pub f: String,
    #[serde(default = "one")]
    pub f_amp: f64,
    pub eta_f: Option<f64>,
    pub f_c: Option<f64>,
    /// `zero`, `stationary` or `bump` (`u0_amp · d^{η_1}`).
    #[serde(default = "default_u0")]
    pub u0: String,
    #[serde(default = "one")]
    pub u0_amp: f64,
    pub eta1: Option<f64>,
    pub u0_c: Option<f64>,
    /// Perturbations `amp e^{−rate t} d^{η_2−2s}` of f and h.
    #[serde(default)]
    pub f_decay_amp: f64,
    #[serde(default)]
    pub h_decay_amp: f64,
    pub decay_eta: Option<f64>,
    /// Absolute rate, or a fraction of λ̄ via `decay_fraction`.
    pub decay_rate: Option<f64>,
    pub decay_fraction: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            f: default_f(),
            f_amp: 1.0,
            eta_f: None,
            f_c: None,
            u0: default_u0(),
            u0_amp: 1.0,
            eta1: None,
            u0_c: None,
            f_decay_amp: 0.0,
            h_decay_amp: 0.0,
            decay_eta: None,
            decay_rate: None,
            decay_fraction: None,
            c1: None,
            c2: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dx: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// `finite` or `infinite`.
    #[serde(default = "default_horizon")]
    pub horizon: String,
    #[serde(default = "default_eig_tol")]
    pub eig_tol: f64,
    #[serde(default = "default_eig_max_iter")]
    pub eig_max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lambda_min: f64,
    pub lambda_max: Option<f64>,
    #[serde(default = "default_lambda_steps")]
    pub lambda_steps: usize,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection { dir: default_dir() }
    }
}

fn one() -> f64 {
    1.0
}
fn default_rule() -> String {
    "constant".into()
}
fn default_zeta() -> f64 {
    0.4
}
fn default_sigma() -> String {
    "full_space".into()
}
fn default_profile() -> String {
    "killing".into()
}
fn default_f() -> String {
    "one".into()
}
fn default_u0() -> String {
    "zero".into()
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_max() -> f64 {
    1.0
}
fn default_horizon() -> String {
    "finite".into()
}
fn default_eig_tol() -> f64 {
    1e-12
}
fn default_eig_max_iter() -> usize {
    1000
}
fn default_lambda_steps() -> usize {
    40
}
fn default_eps() -> f64 {
    0.01
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn need<T: Copy>(v: Option<T>, key: &str, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::config_key(key, format!("missing key `{key}` ({what})")))
}

/// Pulls the offending key out of a deserializer message such as
/// "missing field `s`" or "unknown field `foo`, expected …".
fn key_of(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().trim().to_string();
            Error::Config {
                key: key_of(&message),
                message,
            }
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // relative table paths are taken from the config's directory
        if let (Some(table), Some(dir)) = (&cfg.operator.profile_table, path.parent()) {
            if table.is_relative() {
                cfg.operator.profile_table = Some(dir.join(table));
            }
        }
        Ok(cfg)
    }

    /// Eager validation of everything that does not need a grid.
    fn check(&self) -> Result<()> {
        self.domain()?;
        self.params()?;
        self.family()?;
        let sv = &self.solver;
        for (key, v) in [("dx", sv.dx), ("dt", sv.dt), ("t_max", sv.t_max), ("eig_tol", sv.eig_tol), ("eps", sv.eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config_key(key, format!("`{key}` = {v} must be positive")));
            }
        }
        if !matches!(sv.horizon.as_str(), "finite" | "infinite") {
            return Err(Error::config_key("horizon", format!("unknown horizon `{}`", sv.horizon)));
        }
        if sv.lambda_steps < 2 {
            return Err(Error::config_key("lambda_steps", "at least two probe values are required"));
        }
        let p = &self.problem;
        if !matches!(p.f.as_str(), "zero" | "one" | "distance_power") {
            return Err(Error::config_key("f", format!("unknown forcing law `{}`", p.f)));
        }
        if p.f == "distance_power" {
            need(p.eta_f, "eta_f", "exponent of the distance_power forcing")?;
        }
        if !matches!(p.u0.as_str(), "zero" | "stationary" | "bump") {
            return Err(Error::config_key("u0", format!("unknown initial law `{}`", p.u0)));
        }
        if p.decay_rate.is_some() && p.decay_fraction.is_some() {
            return Err(Error::config_key("decay_fraction", "give either `decay_rate` or `decay_fraction`"));
        }
        let perturbed = p.f_decay_amp != 0.0 || p.h_decay_amp != 0.0;
        if perturbed {
            need(p.decay_eta, "decay_eta", "exponent of the data perturbation")?;
            if p.decay_rate.is_none() && p.decay_fraction.is_none() {
                return Err(Error::config_key("decay_rate", "perturbed data need `decay_rate` or `decay_fraction`"));
            }
        }
        if let Some(fr) = p.decay_fraction {
            if !(fr > 0.0 && fr < 1.0) {
                return Err(Error::config_key("decay_fraction", format!("{fr} must lie in (0, 1)")));
            }
        }
        if self.operator.profile == "synthetic" {
            need(self.operator.profile_c, "profile_c", "constant of the synthetic profile")?;
        }
        if self.operator.profile == "custom" && self.operator.profile_table.is_none() {
            return Err(Error::config_key("profile_table", "custom profile needs `profile_table`"));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        let d = &self.domain;
        match d.kind.as_str() {
            "interval" => DomainSpec::interval(need(d.a, "a", "left endpoint")?, need(d.b, "b", "right endpoint")?),
            "ball" => {
                let dim = d.dim.unwrap_or(2);
                let c = d.center.clone().unwrap_or_else(|| vec![0.0; dim]);
                let center = match (dim, c.as_slice()) {
                    (1, [x]) => Point::on_line(*x),
                    (2, [x, y]) => Point::new(*x, *y),
                    _ => return Err(Error::config_key("center", format!("center needs {dim} coordinates"))),
                };
                DomainSpec::ball(center, need(d.radius, "radius", "ball radius")?, dim)
            }
            "polygon" => {
                let v = d
                    .vertices
                    .as_ref()
                    .ok_or_else(|| Error::config_key("vertices", "missing key `vertices`"))?;
                if v.len() % 2 != 0 {
                    return Err(Error::config_key("vertices", "vertex list must hold x, y pairs"));
                }
                DomainSpec::polygon(v.chunks(2).map(|p| Point::new(p[0], p[1])).collect())
            }
            "l_shape" => Ok(DomainSpec::l_shape()),
            other => Err(Error::config_key("kind", format!("unknown domain kind `{other}`"))),
        }
    }

    pub fn params(&self) -> Result<FracParams> {
        FracParams::new(self.operator.s).map_err(|e| Error::config_key("s", e.to_string()))
    }

    pub fn sigma(&self) -> Result<SigmaSpec> {
        let f = &self.family;
        let cones = || -> Result<Vec<Cone>> {
            if f.sigma_axes.len() != f.sigma_half_angles.len() || f.sigma_axes.is_empty() {
                return Err(Error::config_key(
                    "sigma_axes",
                    "`sigma_axes` and `sigma_half_angles` must be nonempty and of equal length",
                ));
            }
            Ok(f.sigma_axes
                .iter()
                .zip(&f.sigma_half_angles)
                .map(|(&axis, &half_angle)| Cone { axis, half_angle })
                .collect())
        };
        let kind = match f.sigma.as_str() {
            "full_space" => SigmaKind::FullSpace,
            "double_cone" => {
                let c = cones()?;
                if c.len() != 1 {
                    return Err(Error::config_key("sigma_axes", "a double cone has exactly one axis"));
                }
                SigmaKind::DoubleCone(c[0])
            }
            "union_of_cones" => SigmaKind::UnionOfCones(cones()?),
            other => return Err(Error::config_key("sigma", format!("unknown Σ kind `{other}`"))),
        };
        let spec = SigmaSpec { kind, q: f.q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn family(&self) -> Result<DomainFamily> {
        let f = &self.family;
        let rule = match f.rule.as_str() {
            "constant" => FamilyRule::Constant,
            "star_shaped" => FamilyRule::StarShaped,
            "masked" => FamilyRule::Masked,
            "ball_radius" => FamilyRule::BallRadius(match (f.rho, f.rho_coef, f.rho_exponent) {
                (Some(r), None, None) => RhoLaw::Constant(r),
                (None, Some(coef), Some(exponent)) => RhoLaw::DistancePower { coef, exponent },
                _ => {
                    return Err(Error::config_key(
                        "rho",
                        "ball_radius needs either `rho` or both `rho_coef` and `rho_exponent`",
                    ))
                }
            }),
            other => return Err(Error::config_key("rule", format!("unknown family rule `{other}`"))),
        };
        let fam = DomainFamily::new(rule, self.sigma()?, f.zeta)?;
        match (f.rho_decay_amp, f.rho_decay_rate) {
            (None, None) => Ok(fam),
            (Some(amplitude), Some(rate)) if rate > 0.0 && amplitude > -1.0 => {
                fam.with_time(TimeDependence { amplitude, rate })
            }
            (Some(_), Some(_)) => Err(Error::config_key(
                "rho_decay_rate",
                "radius decay needs `rho_decay_rate` > 0 and `rho_decay_amp` > -1",
            )),
            _ => Err(Error::config_key("rho_decay_rate", "give both `rho_decay_amp` and `rho_decay_rate`")),
        }
    }

    pub fn profile(&self) -> Result<CoefficientProfile> {
        let o = &self.operator;
        let kind = match o.profile.as_str() {
            "killing" => ProfileKind::Killing,
            "kinetic" => ProfileKind::Kinetic,
            "synthetic" => ProfileKind::Synthetic(need(o.profile_c, "profile_c", "synthetic constant")?),
            "custom" => {
                let path = o
                    .profile_table
                    .as_ref()
                    .ok_or_else(|| Error::config_key("profile_table", "missing key `profile_table`"))?;
                ProfileKind::Custom(read_table(path)?)
            }
            other => return Err(Error::config_key("profile", format!("unknown profile `{other}`"))),
        };
        Ok(CoefficientProfile {
            kind,
            alpha: o.alpha,
            beta: o.beta,
        })
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(build_grid(&self.domain()?, self.solver.dx)?))
    }

    /// Grid, family and profile assembled into the stationary operator.
    pub fn operator(&self) -> Result<DiscreteOperator> {
        assemble(self.grid()?, &self.family()?, self.params()?, &self.profile()?, None)
    }

    /// Same experiment on a grid refined by `factor`.
    pub fn refined(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.solver.dx /= factor;
        c
    }

    /// The stationary forcing on the operator's grid.
    pub fn forcing(&self, op: &DiscreteOperator) -> GridFunction {
        let p = &self.problem;
        let two_s = 2.0 * op.params().s();
        match p.f.as_str() {
            "zero" => GridFunction::zeros(op.grid()),
            "one" => GridFunction::interior_fn(op.grid(), |_, _| p.f_amp),
            _ => {
                let eta = p.eta_f.unwrap_or(two_s / 2.0);
                GridFunction::interior_fn(op.grid(), |_, d| p.f_amp * d.powf(eta - two_s))
            }
        }
    }

    /// Forcing certificate: the declared `(η_f, C)` when given, else the
    /// tightest constant for the declared (or default `s`) exponent.
    pub fn forcing_certificate(&self, op: &DiscreteOperator, f: &GridFunction) -> Result<ForcingCertificate> {
        let s = op.params().s();
        let eta_f = self.problem.eta_f.unwrap_or(s);
        let c = self.problem.f_c.unwrap_or_else(|| tightest_constant(op, f, eta_f));
        let cert = ForcingCertificate { eta_f, c };
        cert.verify(op, f)?;
        Ok(cert)
    }

    /// Initial datum; `stationary` needs the stationary solution.
    pub fn initial(&self, op: &DiscreteOperator, stationary: Option<&GridFunction>) -> Result<GridFunction> {
        let p = &self.problem;
        Ok(match p.u0.as_str() {
            "zero" => GridFunction::zeros(op.grid()),
            "stationary" => stationary
                .cloned()
                .ok_or_else(|| Error::config_key("u0", "stationary start needs the elliptic solution"))?,
            _ => {
                let eta = p.eta1.unwrap_or(op.params().s());
                GridFunction::interior_fn(op.grid(), |_, d| p.u0_amp * d.powf(eta))
            }
        })
    }

    /// Rate of the data perturbations, resolving `decay_fraction` against λ̄.
    pub fn decay_rate(&self, lambda_bar: Option<f64>) -> Result<Option<f64>> {
        let p = &self.problem;
        match (p.decay_rate, p.decay_fraction) {
            (Some(r), _) => Ok(Some(r)),
            (None, Some(fr)) => match lambda_bar {
                Some(lb) => Ok(Some(fr * lb)),
                None => Err(Error::config_key("decay_fraction", "a relative rate needs the principal eigenvalue")),
            },
            _ => Ok(None),
        }
    }

    /// The parabolic problem over `op`, with `u0` already built.
    pub fn parabolic<'a>(
        &self,
        op: &'a DiscreteOperator,
        f: GridFunction,
        u0: GridFunction,
        lambda_bar: Option<f64>,
    ) -> Result<ParabolicProblem<'a>> {
        let p = &self.problem;
        let sv = &self.solver;
        let horizon = if sv.horizon == "infinite" {
            Horizon::Stationary { t_max: sv.t_max }
        } else {
            Horizon::Finite(sv.t_max)
        };
        let mut prob = ParabolicProblem::new(op, f, u0, sv.dt, horizon);
        let rate = self.decay_rate(lambda_bar)?;
        if let (Some(rate), Some(eta)) = (rate, p.decay_eta) {
            let pert = |amplitude: f64| (amplitude != 0.0).then_some(Perturbation { amplitude, rate, eta });
            prob.f_decay = pert(p.f_decay_amp);
            prob.h_decay = pert(p.h_decay_amp);
            if p.c1.is_some() || p.c2.is_some() {
                prob.decay_certificate = Some(DecayCertificate {
                    eta2: eta,
                    lambda: rate,
                    c1: p.c1.unwrap_or(f64::INFINITY),
                    c2: p.c2.unwrap_or(f64::INFINITY),
                });
            }
        }
        if let Some(c) = p.u0_c {
            prob.initial_certificate = Some(InitialCertificate {
                eta1: p.eta1.unwrap_or(op.params().s()),
                c,
            });
        }
        prob.verify(16)?;
        Ok(prob)
    }

    /// Probe values `λ_min .. λ_max` (λ_max defaults to 2 λ̄).
    pub fn probe_lambdas(&self, lambda_bar: f64) -> Vec<f64> {
        let sv = &self.solver;
        let hi = sv.lambda_max.unwrap_or(2.0 * lambda_bar);
        let n = sv.lambda_steps;
        (0..n).map(|k| sv.lambda_min + (hi - sv.lambda_min) * k as f64 / (n - 1) as f64).collect()
    }
}

fn read_table(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config_key("profile_table", format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|e| Error::config_key("profile_table", format!("bad value `{l}`: {e}")))
        })
        .collect()
}
