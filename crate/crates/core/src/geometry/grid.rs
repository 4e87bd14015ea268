use crate::error::{Error, Result};

use super::domain::{DomainSpec, Point};

/// Uniform lattice over the bounding box of Ω with the boundary-distance field.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: DomainSpec,
    dim: usize,
    dx: f64,
    origin: Point,
    shape: [usize; 2],
    coords: Vec<Point>,
    dist: Vec<f64>,
    interior: Vec<usize>,
    interior_index: Vec<Option<usize>>,
}

fn axis_count(len: f64, dx: f64) -> usize {
    let r = len / dx;
    let rounded = r.round();
    if (r - rounded).abs() <= 1e-9 * r.max(1.0) {
        rounded as usize + 1
    } else {
        r.ceil() as usize + 1
    }
}

/// Lays a lattice of spacing `dx` over the domain's bounding box (anchored at
/// its lower corner) and populates the interior mask and `d(x)`. Distances are
/// exact for intervals and balls, and exact point-to-segment minima for polygons.
pub fn build_grid(domain: &DomainSpec, dx: f64) -> Result<Grid> {
    domain.validate()?;
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::config_key("dx", format!("grid spacing {dx} must be positive")));
    }
    let dim = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let nx = axis_count(hi.x - lo.x, dx);
    let ny = if dim == 1 { 1 } else { axis_count(hi.y - lo.y, dx) };
    if nx.saturating_mul(ny) > 4_000_000 {
        return Err(Error::config_key("dx", format!("grid of {nx}x{ny} nodes is too large")));
    }
    let mut coords = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            coords.push(Point::new(lo.x + i as f64 * dx, if dim == 1 { 0.0 } else { lo.y + j as f64 * dx }));
        }
    }
    let dist: Vec<f64> = coords.iter().map(|p| domain.boundary_distance(*p)).collect();
    let mut interior = Vec::new();
    let mut interior_index = vec![None; coords.len()];
    // nodes within round-off of ∂Ω are boundary nodes
    let floor = 1e-9 * dx;
    for (k, p) in coords.iter().enumerate() {
        if dist[k] > floor && domain.contains(*p) {
            interior_index[k] = Some(interior.len());
            interior.push(k);
        }
    }
    // keep the mask and the distance field consistent: d > 0 exactly on interior nodes
    let dist = dist
        .into_iter()
        .enumerate()
        .map(|(k, d)| if interior_index[k].is_some() { d } else { 0.0 })
        .collect();
    if interior.is_empty() {
        return Err(Error::config_key(
            "dx",
            format!("spacing {dx} is too coarse: no interior nodes"),
        ));
    }
    Ok(Grid {
        domain: domain.clone(),
        dim,
        dx,
        origin: lo,
        shape: [nx, ny],
        coords,
        dist,
        interior,
        interior_index,
    })
}

impl Grid {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    /// Total number of lattice nodes.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coord(&self, node: usize) -> Point {
        self.coords[node]
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn dist(&self, node: usize) -> f64 {
        self.dist[node]
    }

    pub fn dist_field(&self) -> &[f64] {
        &self.dist
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.interior_index[node].is_some()
    }

    /// Grid node indices of interior nodes, in lattice order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_index[node]
    }

    /// Lattice node at integer offset `(di, dj)` from `node`, if inside the box.
    pub fn offset(&self, node: usize, di: i64, dj: i64) -> Option<usize> {
        let [nx, ny] = self.shape;
        let i = (node % nx) as i64 + di;
        let j = (node / nx) as i64 + dj;
        if i < 0 || j < 0 || i >= nx as i64 || j >= ny as i64 {
            None
        } else {
            Some(j as usize * nx + i as usize)
        }
    }

    /// Cell volume `Δx^N`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    /// Interior node nearest to `p`.
    pub fn nearest_interior(&self, p: Point) -> usize {
        *self
            .interior
            .iter()
            .min_by(|a, b| self.coords[**a].dist(p).total_cmp(&self.coords[**b].dist(p)))
            .expect("grid has interior nodes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_quarter_spacing() {
        let g = build_grid(&DomainSpec::interval(0.0, 1.0).unwrap(), 0.25).unwrap();
        let xs: Vec<f64> = g.interior().iter().map(|&k| g.coord(k).x).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
        let ds: Vec<f64> = g.interior().iter().map(|&k| g.dist(k)).collect();
        assert_eq!(ds, vec![0.25, 0.5, 0.25]);
        assert_eq!(g.dist(0), 0.0);
        assert_eq!(g.dist(4), 0.0);
    }

    #[test]
    fn ball_center_distance() {
        let g = build_grid(&DomainSpec::ball(Point::ORIGIN, 1.0, 2).unwrap(), 0.5).unwrap();
        let c = g.nearest_interior(Point::ORIGIN);
        assert_eq!(g.coord(c), Point::ORIGIN);
        assert_eq!(g.dist(c), 1.0);
    }

    #[test]
    fn too_coarse_is_config_error() {
        let err = build_grid(&DomainSpec::interval(0.0, 1.0).unwrap(), 2.0).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn distance_is_bounded_by_half_diagonal() {
        let g = build_grid(&DomainSpec::l_shape(), 0.1).unwrap();
        let (lo, hi) = g.domain().bounding_box();
        let half_diag = 0.5 * lo.dist(hi);
        for &k in g.interior() {
            assert!(g.dist(k) > 0.0 && g.dist(k) <= half_diag);
        }
    }
}
