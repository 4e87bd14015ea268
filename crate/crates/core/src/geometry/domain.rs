use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Point in the plane. One-dimensional problems use `y = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub const fn on_line(x: f64) -> Self {
        Point { x, y: 0.0 }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn from_angle(theta: f64) -> Point {
        Point::new(theta.cos(), theta.sin())
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Surface measure of the unit sphere in dimension `dim` (2 in 1D, 2π in 2D).
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        _ => 2.0 * PI,
    }
}

/// Volume of the unit ball in dimension `dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        _ => PI,
    }
}

/// Unit directions used for angular quadrature together with their weights.
/// In 1D these are the two half-lines; in 2D `samples` equispaced angles
/// offset by half a step so that axis-aligned vertices are never hit head-on.
pub fn quadrature_directions(dim: usize, samples: usize) -> Vec<(Point, f64)> {
    if dim == 1 {
        return vec![(Point::on_line(1.0), 1.0), (Point::on_line(-1.0), 1.0)];
    }
    let m = samples.max(8);
    let w = 2.0 * PI / m as f64;
    (0..m)
        .map(|k| (Point::from_angle(w * (k as f64 + 0.5)), w))
        .collect()
}

/// Base domain Ω: open, bounded, nonempty.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    Ball { center: Point, radius: f64, dim: usize },
    /// Simple polygon, vertices in order (either orientation).
    Polygon { vertices: Vec<Point> },
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = DomainSpec::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn ball(center: Point, radius: f64, dim: usize) -> Result<Self> {
        let d = DomainSpec::Ball {
            center,
            radius,
            dim,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn polygon(vertices: Vec<Point>) -> Result<Self> {
        let d = DomainSpec::Polygon { vertices };
        d.validate()?;
        Ok(d)
    }

    /// The classic L-shape: the square `[0, 2]^2` minus the quadrant `[1, 2]^2`.
    pub fn l_shape() -> Self {
        DomainSpec::Polygon {
            vertices: vec![
                Point::new(0.0, 0.0),
                Point::new(2.0, 0.0),
                Point::new(2.0, 1.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 2.0),
                Point::new(0.0, 2.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::Geometry(format!("empty interval ({a}, {b})")));
                }
            }
            DomainSpec::Ball {
                center,
                radius,
                dim,
            } => {
                if !(*dim == 1 || *dim == 2) {
                    return Err(Error::Geometry(format!("unsupported dimension {dim}")));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Geometry(format!("ball radius {radius} must be positive")));
                }
                if *dim == 1 && center.y != 0.0 {
                    return Err(Error::Geometry("1D ball center must have y = 0".into()));
                }
            }
            DomainSpec::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::Geometry("polygon needs at least 3 vertices".into()));
                }
                if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
                    return Err(Error::Geometry("non-finite polygon vertex".into()));
                }
                if polygon_area(vertices).abs() <= 0.0 {
                    return Err(Error::Geometry("degenerate polygon (zero area)".into()));
                }
                if !polygon_is_simple(vertices) {
                    return Err(Error::Geometry("polygon is self-intersecting".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Ball { dim, .. } => *dim,
            DomainSpec::Polygon { .. } => 2,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DomainSpec::Interval { .. } => "interval",
            DomainSpec::Ball { .. } => "ball",
            DomainSpec::Polygon { .. } => "polygon",
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            DomainSpec::Interval { a, b } => (Point::on_line(*a), Point::on_line(*b)),
            DomainSpec::Ball {
                center,
                radius,
                dim,
            } => {
                if *dim == 1 {
                    (
                        Point::on_line(center.x - radius),
                        Point::on_line(center.x + radius),
                    )
                } else {
                    (
                        Point::new(center.x - radius, center.y - radius),
                        Point::new(center.x + radius, center.y + radius),
                    )
                }
            }
            DomainSpec::Polygon { vertices } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo.x = lo.x.min(v.x);
                    lo.y = lo.y.min(v.y);
                    hi.x = hi.x.max(v.x);
                    hi.y = hi.y.max(v.y);
                }
                (lo, hi)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::Ball { radius, .. } => 2.0 * radius,
            DomainSpec::Polygon { vertices } => {
                let mut best: f64 = 0.0;
                for (i, p) in vertices.iter().enumerate() {
                    for q in &vertices[i + 1..] {
                        best = best.max(p.dist(*q));
                    }
                }
                best
            }
        }
    }

    /// Lebesgue measure of Ω (length in 1D, area in 2D).
    pub fn measure(&self) -> f64 {
        match self {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::Ball { radius, dim, .. } => unit_ball_volume(*dim) * radius.powi(*dim as i32),
            DomainSpec::Polygon { vertices } => polygon_area(vertices).abs(),
        }
    }

    /// Strict membership in the open set Ω.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            DomainSpec::Interval { a, b } => p.x > *a && p.x < *b,
            DomainSpec::Ball { center, radius, .. } => p.dist(*center) < *radius,
            DomainSpec::Polygon { vertices } => {
                point_in_polygon(vertices, p) && polygon_boundary_distance(vertices, p) > 0.0
            }
        }
    }

    /// Distance to ∂Ω for points of Ω, zero elsewhere.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            DomainSpec::Interval { a, b } => {
                if p.x > *a && p.x < *b {
                    (p.x - a).min(b - p.x)
                } else {
                    0.0
                }
            }
            DomainSpec::Ball { center, radius, .. } => (radius - p.dist(*center)).max(0.0),
            DomainSpec::Polygon { vertices } => {
                if point_in_polygon(vertices, p) {
                    polygon_boundary_distance(vertices, p)
                } else {
                    0.0
                }
            }
        }
    }

    /// Parameters `t >= 0` where the ray `p + t dir` crosses ∂Ω, sorted and deduplicated.
    fn ray_crossings(&self, p: Point, dir: Point) -> Vec<f64> {
        let mut ts = Vec::new();
        match self {
            DomainSpec::Interval { a, b } => {
                for end in [*a, *b] {
                    if dir.x != 0.0 {
                        let t = (end - p.x) / dir.x;
                        if t >= 0.0 {
                            ts.push(t);
                        }
                    }
                }
            }
            DomainSpec::Ball {
                center,
                radius,
                dim,
            } => {
                let (rel, d) = if *dim == 1 {
                    (Point::on_line(p.x - center.x), Point::on_line(dir.x))
                } else {
                    (p - *center, dir)
                };
                let a = d.norm_sq();
                if a > 0.0 {
                    let b = rel.dot(d);
                    let c = rel.norm_sq() - radius * radius;
                    let disc = b * b - a * c;
                    if disc > 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / a, (-b + sq) / a] {
                            if t >= 0.0 {
                                ts.push(t);
                            }
                        }
                    }
                }
            }
            DomainSpec::Polygon { vertices } => {
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = b - a;
                    let denom = dir.cross(e);
                    if denom == 0.0 {
                        continue;
                    }
                    let w = a - p;
                    let t = w.cross(e) / denom;
                    let u = w.cross(dir) / denom;
                    if t >= 0.0 && (-1e-14..=1.0 + 1e-14).contains(&u) {
                        ts.push(t);
                    }
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        ts
    }

    /// Maximal intervals `[t0, t1)` of `t >= 0` with `p + t dir` in Ω.
    /// Each candidate sub-interval is classified by a midpoint test, which
    /// keeps grazing contacts at reflex vertices from flipping the parity.
    pub fn ray_inside_intervals(&self, p: Point, dir: Point) -> Vec<(f64, f64)> {
        let mut cuts = vec![0.0];
        cuts.extend(self.ray_crossings(p, dir).into_iter().filter(|t| *t > 0.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for w in cuts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 <= t0 {
                continue;
            }
            let mid = p + dir * (0.5 * (t0 + t1));
            if self.contains(mid) {
                match out.last_mut() {
                    Some(last) if (last.1 - t0).abs() <= 1e-14 * (1.0 + t0) => last.1 = t1,
                    _ => out.push((t0, t1)),
                }
            }
        }
        out
    }

    /// Length of the segment from `p` to the first boundary point along `dir`.
    pub fn first_exit(&self, p: Point, dir: Point) -> Option<f64> {
        if !self.contains(p) {
            return None;
        }
        self.ray_inside_intervals(p, dir)
            .first()
            .filter(|(t0, _)| *t0 == 0.0)
            .map(|(_, t1)| *t1)
    }

    /// `count` points spread along ∂Ω (both endpoints for an interval,
    /// arc-length spacing otherwise, polygon vertices always included).
    pub fn boundary_samples(&self, count: usize) -> Vec<Point> {
        match self {
            DomainSpec::Interval { a, b } => vec![Point::on_line(*a), Point::on_line(*b)],
            DomainSpec::Ball {
                center,
                radius,
                dim,
            } => {
                if *dim == 1 {
                    vec![
                        Point::on_line(center.x - radius),
                        Point::on_line(center.x + radius),
                    ]
                } else {
                    (0..count)
                        .map(|k| *center + Point::from_angle(2.0 * PI * k as f64 / count as f64) * *radius)
                        .collect()
                }
            }
            DomainSpec::Polygon { vertices } => {
                let n = vertices.len();
                let perimeter: f64 = (0..n).map(|i| vertices[i].dist(vertices[(i + 1) % n])).sum();
                let mut out = vertices.clone();
                let extra = count.saturating_sub(n);
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let len = a.dist(b);
                    let k = ((extra as f64) * len / perimeter).round() as usize;
                    for j in 1..=k {
                        let t = j as f64 / (k + 1) as f64;
                        out.push(a + (b - a) * t);
                    }
                }
                out
            }
        }
    }
}

pub fn polygon_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

/// Crossing-number test. Points on the boundary may land on either side;
/// callers that need strictness combine this with the boundary distance.
pub fn point_in_polygon(v: &[Point], p: Point) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let e = b - a;
    let len2 = e.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(e) / len2).clamp(0.0, 1.0);
    p.dist(a + e * t)
}

pub fn polygon_boundary_distance(v: &[Point], p: Point) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| segment_distance(p, v[i], v[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, c: Point, d: f64| {
        d == 0.0 && c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// No two non-adjacent edges meet.
pub fn polygon_is_simple(v: &[Point]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}
