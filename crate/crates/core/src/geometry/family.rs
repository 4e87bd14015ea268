use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::domain::{DomainSpec, Point};
use super::grid::Grid;

/// Double cone `{z : angle(z, ±axis) <= half_angle}` in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cone {
    /// Axis direction as an angle in radians.
    pub axis: f64,
    pub half_angle: f64,
}

impl Cone {
    fn contains(&self, z: Point) -> bool {
        if self.half_angle >= PI / 2.0 {
            return true;
        }
        let r = z.norm();
        if r == 0.0 {
            return false;
        }
        let c = (z.dot(Point::from_angle(self.axis)) / r).abs();
        // closed cone: boundary directions count as inside
        c >= self.half_angle.cos() - 1e-12
    }

    /// Angle intervals (mod π) covered by the cone, split so each lies in [0, π).
    fn arcs_mod_pi(&self) -> Vec<(f64, f64)> {
        if self.half_angle >= PI / 2.0 {
            return vec![(0.0, PI)];
        }
        let c = self.axis.rem_euclid(PI);
        let (a, b) = (c - self.half_angle, c + self.half_angle);
        let mut out = Vec::new();
        if a < 0.0 {
            out.push((a + PI, PI));
            out.push((0.0, b));
        } else if b > PI {
            out.push((a, PI));
            out.push((0.0, b - PI));
        } else {
            out.push((a, b));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SigmaKind {
    FullSpace,
    DoubleCone(Cone),
    UnionOfCones(Vec<Cone>),
}

/// The universal centered set Σ together with its declared annular density `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaSpec {
    pub kind: SigmaKind,
    pub q: f64,
}

impl SigmaSpec {
    pub fn full_space() -> Self {
        SigmaSpec {
            kind: SigmaKind::FullSpace,
            q: 1.0,
        }
    }

    pub fn double_cone(axis: f64, half_angle: f64, q: f64) -> Self {
        SigmaSpec {
            kind: SigmaKind::DoubleCone(Cone { axis, half_angle }),
            q,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::config_key("q", format!("density constant {} must lie in (0, 1]", self.q)));
        }
        let cones: &[Cone] = match &self.kind {
            SigmaKind::FullSpace => &[],
            SigmaKind::DoubleCone(c) => std::slice::from_ref(c),
            SigmaKind::UnionOfCones(cs) => {
                if cs.is_empty() {
                    return Err(Error::config_key("sigma", "empty union of cones"));
                }
                cs
            }
        };
        for c in cones {
            if !(c.half_angle > 0.0 && c.axis.is_finite()) {
                return Err(Error::config_key("sigma", format!("invalid cone {c:?}")));
            }
        }
        Ok(())
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SigmaKind::FullSpace => "full_space",
            SigmaKind::DoubleCone(_) => "symmetric_double_cone",
            SigmaKind::UnionOfCones(_) => "symmetric_union_of_cones",
        }
    }

    /// Membership of the centered point `z` (z = 0 is never in Σ). In 1D every
    /// admissible Σ is the punctured line.
    pub fn contains(&self, z: Point, dim: usize) -> bool {
        if z.x == 0.0 && z.y == 0.0 {
            return false;
        }
        if dim == 1 {
            return true;
        }
        match &self.kind {
            SigmaKind::FullSpace => true,
            SigmaKind::DoubleCone(c) => c.contains(z),
            SigmaKind::UnionOfCones(cs) => cs.iter().any(|c| c.contains(z)),
        }
    }

    /// Exact fraction of directions belonging to Σ (equal to the annular density
    /// since Σ is a cone).
    pub fn angular_fraction(&self, dim: usize) -> f64 {
        if dim == 1 {
            return 1.0;
        }
        let mut arcs: Vec<(f64, f64)> = match &self.kind {
            SigmaKind::FullSpace => return 1.0,
            SigmaKind::DoubleCone(c) => c.arcs_mod_pi(),
            SigmaKind::UnionOfCones(cs) => cs.iter().flat_map(|c| c.arcs_mod_pi()).collect(),
        };
        arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for (a, b) in arcs {
            cur = match cur {
                Some((ca, cb)) if a <= cb => Some((ca, cb.max(b))),
                Some((ca, cb)) => {
                    covered += cb - ca;
                    Some((a, b))
                }
                None => Some((a, b)),
            };
        }
        if let Some((ca, cb)) = cur {
            covered += cb - ca;
        }
        (covered / PI).min(1.0)
    }

    /// Angles in [0, 2π) where the indicator of Σ can jump.
    pub fn angle_breakpoints(&self) -> Vec<f64> {
        let cones: Vec<Cone> = match &self.kind {
            SigmaKind::FullSpace => vec![],
            SigmaKind::DoubleCone(c) => vec![*c],
            SigmaKind::UnionOfCones(cs) => cs.clone(),
        };
        let mut out = Vec::new();
        for c in cones.iter().filter(|c| c.half_angle < PI / 2.0) {
            for base in [c.axis, c.axis + PI] {
                for e in [base - c.half_angle, base + c.half_angle] {
                    out.push(e.rem_euclid(2.0 * PI));
                }
            }
        }
        out
    }
}

/// Radius law for the ball-radius family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoLaw {
    Constant(f64),
    /// `ρ(x) = coef · d(x)^exponent`.
    DistancePower { coef: f64, exponent: f64 },
}

impl RhoLaw {
    pub fn radius(&self, d: f64) -> f64 {
        match *self {
            RhoLaw::Constant(r) => r,
            RhoLaw::DistancePower { coef, exponent } => coef * d.powf(exponent),
        }
    }
}

/// Multiplicative perturbation `ρ(t, x) = ρ(x) (1 + amplitude e^{-rate t})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeDependence {
    pub amplitude: f64,
    pub rate: f64,
}

impl TimeDependence {
    pub fn factor(&self, t: f64) -> f64 {
        1.0 + self.amplitude * (-self.rate * t).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FamilyRule {
    /// Ω(x) = Ω.
    Constant,
    /// Ω(x) = B_ρ(x)(x) ∩ Ω.
    BallRadius(RhoLaw),
    /// Largest star-shaped subset of Ω centered at x.
    StarShaped,
    /// Ω(x) = (x + Σ) ∩ Ω.
    Masked,
}

impl FamilyRule {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyRule::Constant => "constant",
            FamilyRule::BallRadius(_) => "ball_radius",
            FamilyRule::StarShaped => "star_shaped",
            FamilyRule::Masked => "masked",
        }
    }
}

/// The rule x ↦ Ω(x) (optionally Ω(t, x)) with Σ and the locality fraction ζ.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainFamily {
    pub rule: FamilyRule,
    pub sigma: SigmaSpec,
    pub zeta: f64,
    pub time: Option<TimeDependence>,
}

impl DomainFamily {
    pub fn new(rule: FamilyRule, sigma: SigmaSpec, zeta: f64) -> Result<Self> {
        let f = DomainFamily {
            rule,
            sigma,
            zeta,
            time: None,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn constant(zeta: f64) -> Self {
        DomainFamily {
            rule: FamilyRule::Constant,
            sigma: SigmaSpec::full_space(),
            zeta,
            time: None,
        }
    }

    pub fn with_time(mut self, time: TimeDependence) -> Result<Self> {
        self.time = Some(time);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 0.5) {
            return Err(Error::config_key("zeta", format!("locality fraction {} must lie in (0, 1/2)", self.zeta)));
        }
        self.sigma.validate()?;
        if let FamilyRule::BallRadius(law) = &self.rule {
            let ok = match *law {
                RhoLaw::Constant(r) => r > 0.0,
                RhoLaw::DistancePower { coef, exponent } => coef > 0.0 && exponent.is_finite(),
            };
            if !ok {
                return Err(Error::config_key("rho", format!("invalid radius law {law:?}")));
            }
        }
        if let Some(td) = &self.time {
            if !matches!(self.rule, FamilyRule::BallRadius(_)) {
                return Err(Error::config_key(
                    "rho_decay_amp",
                    "time dependence is only supported for the ball_radius rule",
                ));
            }
            if !(td.rate > 0.0 && td.amplitude > -1.0) {
                return Err(Error::config_key("rho_decay_rate", format!("invalid time dependence {td:?}")));
            }
        }
        Ok(())
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time.is_some()
    }

    /// Interaction radius at a center with boundary distance `d`, if the rule has one.
    pub fn radius(&self, d: f64, t: Option<f64>) -> Option<f64> {
        match &self.rule {
            FamilyRule::BallRadius(law) => {
                let base = law.radius(d);
                Some(match (self.time, t) {
                    (Some(td), Some(t)) => base * td.factor(t),
                    _ => base,
                })
            }
            _ => None,
        }
    }

    /// Is `y ∈ Ω(x)` (resp. Ω(t, x))? `x` must lie in Ω. Star-shaped membership
    /// samples the open segment at spacing Δx/4.
    pub fn contains_point(&self, grid: &Grid, x: Point, y: Point, t: Option<f64>) -> bool {
        let domain = grid.domain();
        if !domain.contains(y) {
            return false;
        }
        let dim = grid.dim();
        match &self.rule {
            FamilyRule::Constant => true,
            FamilyRule::BallRadius(_) => {
                // nodes tied with the sphere are left out on both sides of x
                let rho = self.radius(domain.boundary_distance(x), t).unwrap_or(0.0);
                x.dist(y) < rho * (1.0 - 1e-12)
            }
            FamilyRule::Masked => self.sigma.contains(y - x, dim),
            FamilyRule::StarShaped => segment_inside(domain, x, y, grid.dx() / 4.0),
        }
    }

    /// Node form of [`contains_point`](Self::contains_point); total on grid nodes.
    pub fn membership(&self, grid: &Grid, x: usize, y: usize, t: Option<f64>) -> bool {
        if !grid.is_interior(y) {
            return false;
        }
        self.contains_point(grid, grid.coord(x), grid.coord(y), t)
    }

    /// Maximal intervals `[t0, t1)` of `r >= 0` with `x + r·dir ∈ Ω(x)`, computed
    /// exactly from the boundary crossings (no segment sampling).
    pub fn ray_intervals(&self, domain: &DomainSpec, x: Point, dir: Point, t: Option<f64>) -> Vec<(f64, f64)> {
        let dim = domain.dim();
        let inside = domain.ray_inside_intervals(x, dir);
        match &self.rule {
            FamilyRule::Constant => inside,
            FamilyRule::BallRadius(_) => {
                let rho = self.radius(domain.boundary_distance(x), t).unwrap_or(0.0);
                inside
                    .into_iter()
                    .filter(|(a, _)| *a < rho)
                    .map(|(a, b)| (a, b.min(rho)))
                    .collect()
            }
            FamilyRule::StarShaped => inside.into_iter().take(1).filter(|(a, _)| *a == 0.0).collect(),
            FamilyRule::Masked => {
                if self.sigma.contains(dir, dim) {
                    inside
                } else {
                    Vec::new()
                }
            }
        }
    }
}

/// Checks the open segment (x, y) against Ω by sampling at spacing `step`.
pub fn segment_inside(domain: &DomainSpec, x: Point, y: Point, step: f64) -> bool {
    let len = x.dist(y);
    let k = (len / step).ceil().max(1.0) as usize;
    (1..k).all(|i| domain.contains(x + (y - x) * (i as f64 / k as f64)))
}
