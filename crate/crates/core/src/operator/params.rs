use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Point};

/// Fractional order `s ∈ (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracParams {
    s: f64,
}

impl FracParams {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::config_key("s", format!("fractional order {s} must lie in (0, 1)")));
        }
        Ok(FracParams { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Kernel exponent `N + 2s`.
    pub fn kernel_exponent(&self, dim: usize) -> f64 {
        dim as f64 + 2.0 * self.s
    }
}

/// Nodal samples over every grid node; Dirichlet states are zero off the interior.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Grid) -> Self {
        GridFunction {
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        GridFunction { values }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Point) -> f64) -> Self {
        GridFunction {
            values: grid.coords().iter().map(|p| f(*p)).collect(),
        }
    }

    /// Like [`from_fn`](Self::from_fn) but zero off the interior; `f` sees the
    /// point and its boundary distance.
    pub fn interior_fn(grid: &Grid, f: impl Fn(Point, f64) -> f64) -> Self {
        GridFunction {
            values: (0..grid.len())
                .map(|k| if grid.is_interior(k) { f(grid.coord(k), grid.dist(k)) } else { 0.0 })
                .collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn sup_norm(&self) -> f64 {
        crate::linalg::sup_norm(&self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Self {
        GridFunction {
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `node,x[,y],value` rows.
    pub fn write_csv<W: Write>(&self, grid: &Grid, mut w: W, header: &str) -> std::io::Result<()> {
        let two_d = grid.dim() == 2;
        writeln!(w, "{}", if two_d { format!("node,x,y,{header}") } else { format!("node,x,{header}") })?;
        for (k, v) in self.values.iter().enumerate() {
            let p = grid.coord(k);
            if two_d {
                writeln!(w, "{k},{:.12e},{:.12e},{v:.15e}", p.x, p.y)?;
            } else {
                writeln!(w, "{k},{:.12e},{v:.15e}", p.x)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProfileKind {
    /// k(x) = ∫_{Ω^c} |x − y|^{−N−2s} dy.
    Killing,
    /// a(x) = Γ(2s) ∫ dσ / d(x, σ)^{2s}.
    Kinetic,
    /// c · d(x)^{−2s}.
    Synthetic(f64),
    /// Values at every grid node; only interior entries are read.
    Custom(Vec<f64>),
}

impl ProfileKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileKind::Killing => "killing",
            ProfileKind::Kinetic => "kinetic",
            ProfileKind::Synthetic(_) => "synthetic",
            ProfileKind::Custom(_) => "custom",
        }
    }
}

/// Coefficient h with optional declared band `α ≤ h d^{2s} ≤ β`. The measured
/// band is always recorded on the assembled operator.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientProfile {
    pub kind: ProfileKind,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl CoefficientProfile {
    pub fn new(kind: ProfileKind) -> Self {
        CoefficientProfile {
            kind,
            alpha: None,
            beta: None,
        }
    }

    pub fn killing() -> Self {
        Self::new(ProfileKind::Killing)
    }

    pub fn synthetic(c: f64) -> Self {
        Self::new(ProfileKind::Synthetic(c))
    }

    pub fn with_bounds(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = Some(alpha);
        self.beta = Some(beta);
        self
    }
}
