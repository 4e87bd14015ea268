use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{quadrature_directions, DomainFamily, DomainSpec, Grid};
use crate::linalg::{CsrMatrix, ShiftedSystem, Weights};

use super::coefficients::{
    interval_difference_integral, kinetic_coefficient_with, killing_term_with, shell_factor, DEFAULT_DIRECTIONS,
    SHELL_CELLS,
};
use super::params::{CoefficientProfile, FracParams, GridFunction, ProfileKind};

/// `A = diag(h) + L` over a set of unknowns, with `L_ii = Σ_j w_ij` and
/// `L_ij = −w_ij`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    grid: Arc<Grid>,
    family: DomainFamily,
    params: FracParams,
    profile_name: &'static str,
    nodes: Vec<usize>,
    unknown_of: Vec<Option<usize>>,
    dist: Vec<f64>,
    h: Vec<f64>,
    weights: Weights,
    row_sums: Vec<f64>,
    alpha: f64,
    beta: f64,
    time: Option<f64>,
    localized: bool,
}

/// Nonzero weights of row `x` as `(grid node, w)`, before the Dirichlet
/// restriction to unknowns (every listed node is interior).
pub fn kernel_weights(
    grid: &Grid,
    family: &DomainFamily,
    params: FracParams,
    x: usize,
    t: Option<f64>,
) -> Vec<(usize, f64)> {
    let gamma = shell_factor(&family.sigma, grid.dim(), params.s());
    row_weights(grid, family, params, gamma, x, t)
}

fn row_weights(
    grid: &Grid,
    family: &DomainFamily,
    params: FracParams,
    gamma: f64,
    x: usize,
    t: Option<f64>,
) -> Vec<(usize, f64)> {
    let dim = grid.dim();
    let dx = grid.dx();
    let expo = params.kernel_exponent(dim);
    let vol = grid.cell_volume();
    let [nx, _] = grid.shape();
    let (xi, xj) = ((x % nx) as i64, (x / nx) as i64);
    let weight = |y: usize| -> Option<(usize, f64)> {
        if y == x || !family.membership(grid, x, y, t) {
            return None;
        }
        let (di, dj) = ((y % nx) as i64 - xi, (y / nx) as i64 - xj);
        let r = (((di * di + dj * dj) as f64).sqrt()) * dx;
        let mut w = vol * r.powf(-expo);
        if di.abs().max(dj.abs()) <= SHELL_CELLS {
            w *= gamma;
        }
        Some((y, w))
    };
    match family.radius(grid.dist(x), t) {
        Some(rho) => {
            let reach = (rho / dx).ceil() as i64;
            let jr = if dim == 1 { 0 } else { reach };
            let mut out = Vec::new();
            for dj in -jr..=jr {
                for di in -reach..=reach {
                    if let Some(y) = grid.offset(x, di, dj) {
                        if let Some(e) = weight(y) {
                            out.push(e);
                        }
                    }
                }
            }
            out
        }
        None => grid.interior().iter().filter_map(|&y| weight(y)).collect(),
    }
}

/// Builds `A = diag(h) + L` on the interior nodes with homogeneous Dirichlet
/// data (boundary columns eliminated).
pub fn assemble(
    grid: Arc<Grid>,
    family: &DomainFamily,
    params: FracParams,
    profile: &CoefficientProfile,
    t: Option<f64>,
) -> Result<DiscreteOperator> {
    family.validate()?;
    let h_full = profile_values(&grid, params, &profile.kind)?;
    let nodes = grid.interior().to_vec();
    let dist: Vec<f64> = nodes.iter().map(|&k| grid.dist(k)).collect();
    let h: Vec<f64> = nodes.iter().map(|&k| h_full[k]).collect();
    let weights = assemble_weights(&grid, family, params, t);
    let op = DiscreteOperator::from_parts(
        grid,
        family.clone(),
        params,
        profile.kind.name(),
        nodes,
        dist,
        h,
        weights,
        t,
        false,
    );
    op.check_bounds(profile.alpha, profile.beta)?;
    Ok(op)
}

/// The off-diagonal weights between interior nodes, in unknown numbering.
pub fn assemble_weights(grid: &Grid, family: &DomainFamily, params: FracParams, t: Option<f64>) -> Weights {
    let gamma = shell_factor(&family.sigma, grid.dim(), params.s());
    let nodes = grid.interior();
    let n = nodes.len();
    let rows: Vec<Vec<(usize, f64)>> = nodes
        .par_iter()
        .map(|&x| {
            row_weights(grid, family, params, gamma, x, t)
                .into_iter()
                .map(|(y, w)| (grid.interior_index(y).expect("interior"), w))
                .collect()
        })
        .collect();
    let nnz: usize = rows.iter().map(Vec::len).sum();
    if n > 0 && nnz as f64 > Weights::DENSE_FILL * (n * n) as f64 {
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, w) in row {
                m[(i, j)] = w;
            }
        }
        Weights::Dense(m)
    } else {
        Weights::Sparse(CsrMatrix::from_rows(n, rows))
    }
}

fn profile_values(grid: &Grid, params: FracParams, kind: &ProfileKind) -> Result<Vec<f64>> {
    let s = params.s();
    Ok(match kind {
        ProfileKind::Killing => killing_term_with(grid, params, DEFAULT_DIRECTIONS).into_values(),
        ProfileKind::Kinetic => kinetic_coefficient_with(grid, params, DEFAULT_DIRECTIONS)?.into_values(),
        ProfileKind::Synthetic(c) => {
            if !(*c > 0.0) {
                return Err(Error::config_key("profile_c", format!("synthetic constant {c} must be positive")));
            }
            (0..grid.len())
                .map(|k| if grid.is_interior(k) { c * grid.dist(k).powf(-2.0 * s) } else { 0.0 })
                .collect()
        }
        ProfileKind::Custom(v) => {
            if v.len() != grid.len() {
                return Err(Error::config_key(
                    "profile_table",
                    format!("custom profile has {} values for {} grid nodes", v.len(), grid.len()),
                ));
            }
            v.clone()
        }
    })
}

impl DiscreteOperator {
    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        grid: Arc<Grid>,
        family: DomainFamily,
        params: FracParams,
        profile_name: &'static str,
        nodes: Vec<usize>,
        dist: Vec<f64>,
        h: Vec<f64>,
        weights: Weights,
        time: Option<f64>,
        localized: bool,
    ) -> Self {
        let mut unknown_of = vec![None; grid.len()];
        for (i, &k) in nodes.iter().enumerate() {
            unknown_of[k] = Some(i);
        }
        let row_sums = weights.row_sums();
        let mut op = DiscreteOperator {
            grid,
            family,
            params,
            profile_name,
            nodes,
            unknown_of,
            dist,
            h,
            weights,
            row_sums,
            alpha: 0.0,
            beta: 0.0,
            time,
            localized,
        };
        op.measure_bounds();
        op
    }

    fn measure_bounds(&mut self) {
        let two_s = 2.0 * self.params.s();
        let scaled = self.h.iter().zip(&self.dist).map(|(h, d)| h * d.powf(two_s));
        let (lo, hi) = scaled.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        self.alpha = lo;
        self.beta = hi;
    }

    fn check_bounds(&self, alpha: Option<f64>, beta: Option<f64>) -> Result<()> {
        let two_s = 2.0 * self.params.s();
        let (a, b) = (alpha.unwrap_or(0.0), beta.unwrap_or(f64::INFINITY));
        for (i, (h, d)) in self.h.iter().zip(&self.dist).enumerate() {
            let v = h * d.powf(two_s);
            let low_ok = if alpha.is_some() { v >= a * (1.0 - 1e-12) } else { v > 0.0 };
            if !(low_ok && v <= b * (1.0 + 1e-12)) {
                return Err(Error::ProfileBound {
                    node: self.nodes[i],
                    scaled: v,
                    alpha: a,
                    beta: b,
                });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<Grid> {
        self.grid.clone()
    }

    pub fn family(&self) -> &DomainFamily {
        &self.family
    }

    pub fn params(&self) -> FracParams {
        self.params
    }

    pub fn profile_name(&self) -> &'static str {
        self.profile_name
    }

    /// Number of unknowns.
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Grid node of each unknown.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        self.unknown_of[node]
    }

    /// Boundary distance per unknown (to ∂O for a localized operator).
    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    /// `A_ii = h_i + Σ_j w_ij`.
    pub fn diagonal(&self) -> Vec<f64> {
        self.h.iter().zip(&self.row_sums).map(|(h, r)| h + r).collect()
    }

    /// Measured `min h d^{2s}`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Measured `max h d^{2s}`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn is_localized(&self) -> bool {
        self.localized
    }

    /// `min_i (A_ii − λ − Σ_{j≠i} |A_ij|) = min_i h_i − λ`.
    pub fn dominance_margin(&self, lambda: f64) -> f64 {
        self.h.iter().fold(f64::INFINITY, |m, h| m.min(*h)) - lambda
    }

    /// Off-diagonal sign pattern and strict row dominance, checked entrywise.
    pub fn is_m_matrix(&self) -> bool {
        let nonneg = (0..self.n()).all(|i| self.weights.row(i).iter().all(|(_, w)| *w >= 0.0));
        nonneg && self.dominance_margin(0.0) > 0.0
    }

    pub fn restrict(&self, u: &GridFunction) -> Vec<f64> {
        self.nodes.iter().map(|&k| u.get(k)).collect()
    }

    /// Grid function equal to `v` on the unknowns and zero elsewhere.
    pub fn extend(&self, v: &[f64]) -> GridFunction {
        let mut out = vec![0.0; self.grid.len()];
        for (i, &k) in self.nodes.iter().enumerate() {
            out[k] = v[i];
        }
        GridFunction::from_values(out)
    }

    /// `A v` on the unknowns.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.system(0.0).apply(v)
    }

    /// `L v` on the unknowns.
    pub fn apply_l(&self, v: &[f64]) -> Vec<f64> {
        let wv = self.weights.matvec(v);
        v.iter().zip(&self.row_sums).zip(wv).map(|((v, r), w)| r * v - w).collect()
    }

    /// `(L u)(x) = Σ_j w_xj (u(x) − u(x_j))` for a grid function `u` and grid node `x`.
    pub fn apply_pv(&self, u: &GridFunction, x: usize) -> f64 {
        let Some(i) = self.unknown_of[x] else { return 0.0 };
        let ux = u.get(x);
        self.weights
            .row(i)
            .into_iter()
            .map(|(j, w)| w * (ux - u.get(self.nodes[j])))
            .sum()
    }

    /// `A − λI`.
    pub fn system(&self, lambda: f64) -> ShiftedSystem<'_> {
        ShiftedSystem {
            weights: &self.weights,
            diag: self.diagonal().into_iter().map(|d| d - lambda).collect(),
            c: 1.0,
        }
    }

    /// `I + Δt A`.
    pub fn step_system(&self, dt: f64) -> ShiftedSystem<'_> {
        ShiftedSystem {
            weights: &self.weights,
            diag: self.diagonal().into_iter().map(|d| 1.0 + dt * d).collect(),
            c: dt,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.system(0.0).to_dense()
    }

    /// Same operator with `L` removed.
    pub fn without_pv(&self) -> Self {
        self.with_weights(Weights::zeros(self.n()))
    }

    /// `c h` and `c L`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut op = self.with_weights(self.weights.scaled(c));
        op.h.iter_mut().for_each(|h| *h *= c);
        op.measure_bounds();
        op
    }

    /// Same weights with a new coefficient (per unknown).
    pub fn with_h(&self, h: Vec<f64>) -> Self {
        assert_eq!(h.len(), self.n());
        let mut op = self.clone();
        op.h = h;
        op.measure_bounds();
        op
    }

    fn with_weights(&self, weights: Weights) -> Self {
        let mut op = self.clone();
        op.row_sums = weights.row_sums();
        op.weights = weights;
        op
    }

    /// Re-evaluates the weights with the family at time `t`, keeping h.
    pub fn reassemble_at(&self, t: f64) -> Self {
        assert!(!self.localized, "time-dependent localized operators are not supported");
        let w = assemble_weights(&self.grid, &self.family, self.params, Some(t));
        let mut op = self.with_weights(w);
        op.time = Some(t);
        op
    }

    /// Grid-index adjacency `i → j` whenever `w_ij > 0`.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            for (j, _) in self.weights.row(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    /// Number of weakly connected components of the interaction graph.
    pub fn component_count(&self) -> usize {
        let n = self.n();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for (j, _) in self.weights.row(i) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut comp = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if comp[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            comp[s] = true;
            while let Some(i) = stack.pop() {
                for &j in &adj[i] {
                    if !comp[j] {
                        comp[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }

    /// Coordinate-format dump: header comments, then `row,col,value` for
    /// every nonzero of A (unknown numbering).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# s={} dx={} family={} profile={}", self.params.s(), self.grid.dx(), self.family.rule.name(), self.profile_name)?;
        writeln!(w, "# n={} storage={}", self.n(), if self.weights.is_dense() { "dense" } else { "sparse" })?;
        writeln!(w, "row,col,value")?;
        let diag = self.diagonal();
        for (i, &d) in diag.iter().enumerate() {
            let mut row = self.weights.row(i);
            row.push((i, 0.0));
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                let a = if j == i { d } else { -v };
                writeln!(w, "{i},{j},{a:.17e}")?;
            }
        }
        Ok(())
    }

    /// `node,x[,y],d,h,h_scaled` rows over the unknowns.
    pub fn write_coefficients<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let two_d = self.grid.dim() == 2;
        writeln!(w, "{}", if two_d { "node,x,y,d,h,h_scaled" } else { "node,x,d,h,h_scaled" })?;
        let two_s = 2.0 * self.params.s();
        for (i, &k) in self.nodes.iter().enumerate() {
            let p = self.grid.coord(k);
            let (d, h) = (self.dist[i], self.h[i]);
            let xy = if two_d { format!("{:.12e},{:.12e}", p.x, p.y) } else { format!("{:.12e}", p.x) };
            writeln!(w, "{k},{xy},{d:.12e},{h:.15e},{:.15e}", h * d.powf(two_s))?;
        }
        Ok(())
    }
}

/// How `∫_{Ω(x) ∖ O} |x − y|^{-N-2s} dy` is evaluated in [`localize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TailRule {
    /// Exact ray intervals with angular quadrature.
    #[default]
    Quadrature,
    /// Sum of the dropped lattice weights.
    Lattice,
}

/// Restricts `op` to the unknowns lying in the open set `region`, with
/// `Ξ(x) = Ω(x) ∩ O` and `j(x) = h(x) + ∫_{Ω(x) ∖ O}`. Distances become the
/// distance to `∂O`.
pub fn localize(op: &DiscreteOperator, region: &DomainSpec, rule: TailRule) -> Result<DiscreteOperator> {
    region.validate()?;
    let grid = op.grid();
    if region.dim() != grid.dim() {
        return Err(Error::config_key("region", "region dimension differs from the grid"));
    }
    // nodes within round-off of ∂O are left out, as for ∂Ω
    let floor = 1e-9 * grid.dx();
    let keep: Vec<usize> = (0..op.n())
        .filter(|&i| {
            let p = grid.coord(op.nodes[i]);
            region.contains(p) && region.boundary_distance(p) > floor
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::config_key("region", "localization region contains no unknowns"));
    }
    let s = op.params.s();
    let t = op.time;
    let tails: Vec<f64> = match rule {
        TailRule::Lattice => {
            let inside: Vec<bool> = (0..op.n()).map(|i| region.contains(grid.coord(op.nodes[i]))).collect();
            keep.iter()
                .map(|&i| {
                    op.weights
                        .row(i)
                        .into_iter()
                        .filter(|(j, _)| !inside[*j])
                        .map(|(_, w)| w)
                        .sum()
                })
                .collect()
        }
        TailRule::Quadrature => {
            let dirs = quadrature_directions(grid.dim(), DEFAULT_DIRECTIONS);
            keep.par_iter()
                .map(|&i| {
                    let x = grid.coord(op.nodes[i]);
                    dirs.iter()
                        .map(|(dir, w)| {
                            let outer = op.family.ray_intervals(grid.domain(), x, *dir, t);
                            let inner = region.ray_inside_intervals(x, *dir);
                            w * interval_difference_integral(&outer, &inner, s)
                        })
                        .sum()
                })
                .collect()
        }
    };
    let nodes: Vec<usize> = keep.iter().map(|&i| op.nodes[i]).collect();
    let dist: Vec<f64> = nodes.iter().map(|&k| region.boundary_distance(grid.coord(k))).collect();
    let h: Vec<f64> = keep.iter().zip(&tails).map(|(&i, tail)| op.h[i] + tail).collect();
    let weights = op.weights.submatrix(&keep);
    Ok(DiscreteOperator::from_parts(
        op.grid.clone(),
        op.family.clone(),
        op.params,
        op.profile_name,
        nodes,
        dist,
        h,
        weights,
        op.time,
        true,
    ))
}
