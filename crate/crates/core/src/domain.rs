//! Convex domains, uniform grids and boundary geometry.
//!
//! Points are `[x, y]`; one-dimensional domains use `y = 0` and a single grid
//! row. Dirichlet data lives on the true boundary: a node whose axis neighbor
//! lies outside stores the exact distance to the crossing instead.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Shape parameters of a convex domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Disk { center: Point, radius: f64 },
    /// Axis-aligned ellipse.
    Ellipse { center: Point, semi_axes: [f64; 2] },
    /// Convex polygon, vertices counterclockwise.
    Polygon { vertices: Vec<Point> },
}

/// A validated bounded convex domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Shape", into = "Shape")]
pub struct ConvexDomain {
    shape: Shape,
    /// Outward unit normals and offsets `n.x <= c` for polygon edges.
    #[serde(skip)]
    edges: Vec<(Point, f64)>,
}

impl TryFrom<Shape> for ConvexDomain {
    type Error = Error;

    fn try_from(shape: Shape) -> Result<Self> {
        match shape {
            Shape::Interval { a, b } => Self::interval(a, b),
            Shape::Disk { center, radius } => Self::disk(center, radius),
            Shape::Ellipse { center, semi_axes } => Self::ellipse(center, semi_axes),
            Shape::Polygon { vertices } => Self::polygon(vertices),
        }
    }
}

impl From<ConvexDomain> for Shape {
    fn from(d: ConvexDomain) -> Shape {
        d.shape
    }
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl ConvexDomain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !finite(&[a, b]) || !(a < b) {
            return Err(Error::InvalidDomain(format!("interval ({a}, {b}) is empty")));
        }
        Ok(ConvexDomain { shape: Shape::Interval { a, b }, edges: Vec::new() })
    }

    pub fn disk(center: Point, radius: f64) -> Result<Self> {
        if !finite(&center) || !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDomain(format!("disk radius {radius} must be positive")));
        }
        Ok(ConvexDomain { shape: Shape::Disk { center, radius }, edges: Vec::new() })
    }

    pub fn ellipse(center: Point, semi_axes: [f64; 2]) -> Result<Self> {
        if !finite(&center) || !finite(&semi_axes) || !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
            return Err(Error::InvalidDomain(format!("ellipse semi-axes {semi_axes:?} must be positive")));
        }
        Ok(ConvexDomain { shape: Shape::Ellipse { center, semi_axes }, edges: Vec::new() })
    }

    /// Convex polygon. Clockwise input is reversed; collinear or reflex corners are rejected.
    pub fn polygon(mut vertices: Vec<Point>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 || !vertices.iter().all(|v| finite(v)) {
            return Err(Error::InvalidDomain("polygon needs at least 3 finite vertices".into()));
        }
        let turn = |vs: &[Point], i: usize| {
            let (a, b, c) = (vs[i], vs[(i + 1) % n], vs[(i + 2) % n]);
            cross(sub(b, a), sub(c, b))
        };
        let scale = vertices.iter().map(|v| norm(*v)).fold(1.0, f64::max);
        let eps = 1e-12 * scale * scale;
        let turns: Vec<f64> = (0..n).map(|i| turn(&vertices, i)).collect();
        if turns.iter().all(|t| *t < -eps) {
            vertices.reverse();
        } else if !turns.iter().all(|t| *t > eps) {
            return Err(Error::InvalidDomain("polygon is not strictly convex".into()));
        }
        // a star polygon also turns one way at each corner; its winding exceeds 2 pi
        let winding: f64 = (0..n)
            .map(|i| {
                let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                let (u, v) = (sub(b, a), sub(c, b));
                cross(u, v).atan2(dot(u, v))
            })
            .sum();
        if (winding - 2.0 * PI).abs() > 1e-6 {
            return Err(Error::InvalidDomain("polygon winds more than once".into()));
        }
        let edges = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let e = sub(b, a);
                let len = norm(e);
                let normal = [e[1] / len, -e[0] / len];
                (normal, dot(normal, a))
            })
            .collect();
        Ok(ConvexDomain { shape: Shape::Polygon { vertices }, edges })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::polygon(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// `(min corner, max corner)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match &self.shape {
            Shape::Interval { a, b } => ([*a, 0.0], [*b, 0.0]),
            Shape::Disk { center: c, radius: r } => ([c[0] - r, c[1] - r], [c[0] + r, c[1] + r]),
            Shape::Ellipse { center: c, semi_axes: s } => ([c[0] - s[0], c[1] - s[1]], [c[0] + s[0], c[1] + s[1]]),
            Shape::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Length scale used for relative tolerances.
    pub fn scale(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi[0] - lo[0]).max(hi[1] - lo[1])
    }

    /// Negative inside, zero on the boundary, positive outside.
    ///
    /// Exact signed distance for intervals, disks and (inside) polygons; for
    /// ellipses the sign is exact and the magnitude is a first-order proxy.
    pub fn level(&self, x: Point) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => (a - x[0]).max(x[0] - b),
            Shape::Disk { center, radius } => norm(sub(x, *center)) - radius,
            Shape::Ellipse { center, semi_axes: s } => {
                let d = sub(x, *center);
                let rho = ((d[0] / s[0]).powi(2) + (d[1] / s[1]).powi(2)).sqrt();
                (rho - 1.0) * s[0].min(s[1])
            }
            Shape::Polygon { .. } => self
                .edges
                .iter()
                .map(|(n, c)| dot(*n, x) - c)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        self.level(x) < 0.0
    }

    /// Distance from an interior point to the boundary (0 outside).
    pub fn boundary_distance(&self, x: Point) -> f64 {
        match &self.shape {
            Shape::Ellipse { center, semi_axes } => {
                if !self.contains(x) {
                    return 0.0;
                }
                ellipse_distance(sub(x, *center), *semi_axes)
            }
            _ => (-self.level(x)).max(0.0),
        }
    }

    /// Distance `t >= 0` such that `x + t dir` lies on the boundary, for `x`
    /// inside and `dir` a unit vector.
    pub fn ray_exit(&self, x: Point, dir: Point) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => {
                if dir[0] > 0.0 {
                    (b - x[0]) / dir[0]
                } else if dir[0] < 0.0 {
                    (a - x[0]) / dir[0]
                } else {
                    f64::INFINITY
                }
            }
            Shape::Disk { center, radius } => {
                let d = sub(x, *center);
                quadratic_exit(dot(dir, dir), dot(d, dir), dot(d, d) - radius * radius)
            }
            Shape::Ellipse { center, semi_axes: s } => {
                let d = sub(x, *center);
                let dd = [d[0] / s[0], d[1] / s[1]];
                let vv = [dir[0] / s[0], dir[1] / s[1]];
                quadratic_exit(dot(vv, vv), dot(dd, vv), dot(dd, dd) - 1.0)
            }
            Shape::Polygon { .. } => self
                .edges
                .iter()
                .filter_map(|(n, c)| {
                    let rate = dot(*n, dir);
                    (rate > 0.0).then(|| ((c - dot(*n, x)) / rate).max(0.0))
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Outward unit normal at a boundary point (nearest edge for polygons).
    pub fn outward_normal(&self, x: Point) -> Point {
        match &self.shape {
            Shape::Interval { a, b } => {
                if (x[0] - a).abs() <= (x[0] - b).abs() {
                    [-1.0, 0.0]
                } else {
                    [1.0, 0.0]
                }
            }
            Shape::Disk { center, .. } => {
                let d = sub(x, *center);
                let r = norm(d);
                [d[0] / r, d[1] / r]
            }
            Shape::Ellipse { center, semi_axes: s } => {
                let d = sub(x, *center);
                let g = [d[0] / (s[0] * s[0]), d[1] / (s[1] * s[1])];
                let r = norm(g);
                [g[0] / r, g[1] / r]
            }
            Shape::Polygon { .. } => {
                let (n, _) = self
                    .edges
                    .iter()
                    .max_by(|(n1, c1), (n2, c2)| (dot(*n1, x) - c1).total_cmp(&(dot(*n2, x) - c2)))
                    .expect("polygon has edges");
                *n
            }
        }
    }

    /// Center and radius of a largest inscribed ball.
    pub fn incircle(&self) -> (Point, f64) {
        match &self.shape {
            Shape::Interval { a, b } => ([(a + b) / 2.0, 0.0], (b - a) / 2.0),
            Shape::Disk { center, radius } => (*center, *radius),
            Shape::Ellipse { center, semi_axes } => (*center, semi_axes[0].min(semi_axes[1])),
            Shape::Polygon { .. } => {
                // the inscribed radius is the max of a concave function; ternary
                // search in x over the partial maximum in y
                let (lo, hi) = self.bounding_box();
                let inner = |x: f64| {
                    let y = ternary_max(lo[1], hi[1], |y| -self.level([x, y]));
                    (y, -self.level([x, y]))
                };
                let x = ternary_max(lo[0], hi[0], |x| inner(x).1);
                let (y, r) = inner(x);
                ([x, y], r)
            }
        }
    }

    pub fn inradius(&self) -> f64 {
        self.incircle().1
    }

    /// Largest radius of a ball inside the domain touching the boundary point
    /// `x0` with outward normal `normal`.
    pub fn interior_ball_radius(&self, x0: Point, normal: Point) -> f64 {
        if let Shape::Disk { radius, .. } = self.shape {
            return radius;
        }
        let fits = |rho: f64| {
            let c = [x0[0] - rho * normal[0], x0[1] - rho * normal[1]];
            self.boundary_distance(c) >= rho * (1.0 - 1e-9)
        };
        let (mut lo, mut hi) = (0.0, self.inradius());
        if fits(hi) {
            return hi;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Perimeter (number of endpoints for an interval).
    pub fn perimeter(&self) -> f64 {
        match &self.shape {
            Shape::Interval { .. } => 2.0,
            Shape::Disk { radius, .. } => 2.0 * PI * radius,
            Shape::Ellipse { semi_axes: s, .. } => {
                let m = 4096;
                (0..m)
                    .map(|k| {
                        let t = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                        (s[0] * s[0] * t.sin().powi(2) + s[1] * s[1] * t.cos().powi(2)).sqrt()
                    })
                    .sum::<f64>()
                    * 2.0
                    * PI
                    / m as f64
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| norm(sub(vertices[(i + 1) % n], vertices[i]))).sum()
            }
        }
    }

    /// Area (length for an interval).
    pub fn area(&self) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::Ellipse { semi_axes: s, .. } => PI * s[0] * s[1],
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                0.5 * (0..n).map(|i| cross(vertices[i], vertices[(i + 1) % n])).sum::<f64>()
            }
        }
    }

    /// `count` equally spaced boundary points with outward unit normals.
    ///
    /// Polygon samples sit at midpoints of equal arclength pieces and are
    /// pushed off the corners, where the normal is undefined. Intervals
    /// alternate between the two endpoints.
    pub fn boundary_samples(&self, count: usize) -> Vec<(Point, Point)> {
        match &self.shape {
            Shape::Interval { a, b } => (0..count)
                .map(|k| if k % 2 == 0 { ([*a, 0.0], [-1.0, 0.0]) } else { ([*b, 0.0], [1.0, 0.0]) })
                .collect(),
            Shape::Disk { center, radius } => (0..count)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / count as f64;
                    let nrm = [t.cos(), t.sin()];
                    ([center[0] + radius * nrm[0], center[1] + radius * nrm[1]], nrm)
                })
                .collect(),
            Shape::Ellipse { center, semi_axes: s } => (0..count)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / count as f64;
                    let x = [center[0] + s[0] * t.cos(), center[1] + s[1] * t.sin()];
                    (x, self.outward_normal(x))
                })
                .collect(),
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let lengths: Vec<f64> = (0..n).map(|i| norm(sub(vertices[(i + 1) % n], vertices[i]))).collect();
                let total: f64 = lengths.iter().sum();
                let margin = 1e-6 * total;
                (0..count)
                    .map(|k| {
                        let mut s = (k as f64 + 0.5) * total / count as f64;
                        let mut i = 0;
                        while i + 1 < n && s > lengths[i] {
                            s -= lengths[i];
                            i += 1;
                        }
                        let s = s.clamp(margin.min(lengths[i] / 2.0), (lengths[i] - margin).max(lengths[i] / 2.0));
                        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                        let t = s / lengths[i];
                        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                        (x, self.edges[i].0)
                    })
                    .collect()
            }
        }
    }
}

impl fmt::Display for ConvexDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Interval { a, b } => write!(f, "interval ({a}, {b})"),
            Shape::Disk { center, radius } => write!(f, "disk center {center:?} radius {radius}"),
            Shape::Ellipse { center, semi_axes } => write!(f, "ellipse center {center:?} semi-axes {semi_axes:?}"),
            Shape::Polygon { vertices } => write!(f, "polygon with {} vertices", vertices.len()),
        }
    }
}

/// Largest root of `a t^2 + 2 b t + c = 0` (the exit time for `c < 0`).
fn quadratic_exit(a: f64, b: f64, c: f64) -> f64 {
    let disc = (b * b - a * c).max(0.0);
    // stable form of (-b + sqrt(disc)) / a
    if b <= 0.0 {
        (-b + disc.sqrt()) / a
    } else {
        (-c) / (b + disc.sqrt())
    }
}

/// Argmax of a unimodal function on `[lo, hi]`.
fn ternary_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
        if hi - lo < 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Distance from `d` (ellipse frame) to the ellipse with semi-axes `s`.
fn ellipse_distance(d: Point, s: [f64; 2]) -> f64 {
    let dist = |t: f64| norm([s[0] * t.cos() - d[0], s[1] * t.sin() - d[1]]);
    let m = 128;
    let step = 2.0 * PI / m as f64;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..m {
        let t = k as f64 * step;
        let v = dist(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    let t = ternary_max(best.1 - step, best.1 + step, |t| -dist(t));
    dist(t).min(best.0)
}

/// Node classification on a uniform grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeClass {
    /// Inside, with all axis neighbors inside.
    Interior,
    /// Inside, with some axis neighbor on or beyond the boundary.
    BoundaryAdjacent,
    /// On the boundary (up to rounding); carries the Dirichlet value.
    Boundary,
    Exterior,
}

impl NodeClass {
    /// Whether the node carries an unknown.
    pub fn is_inside(self) -> bool {
        matches!(self, NodeClass::Interior | NodeClass::BoundaryAdjacent)
    }
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeClass::Interior => "interior",
            NodeClass::BoundaryAdjacent => "boundary-adjacent",
            NodeClass::Boundary => "boundary",
            NodeClass::Exterior => "exterior",
        })
    }
}

impl FromStr for NodeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(NodeClass::Interior),
            "boundary-adjacent" => Ok(NodeClass::BoundaryAdjacent),
            "boundary" => Ok(NodeClass::Boundary),
            "exterior" => Ok(NodeClass::Exterior),
            other => Err(Error::InvalidArgument(format!("unknown node class `{other}`"))),
        }
    }
}

/// Axis directions in arm order.
pub const AXES: [[i64; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];

/// Distance to the next value point along an axis and the node holding it
/// (`None` when the value is the boundary datum at a cut).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arm {
    pub length: f64,
    pub node: Option<usize>,
}

/// Uniform grid over a convex domain.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: ConvexDomain,
    h: f64,
    origin: Point,
    nx: usize,
    ny: usize,
    classes: Vec<NodeClass>,
    arms: Vec<[Arm; 4]>,
    inside: Vec<usize>,
}

impl Grid {
    /// Builds and classifies the grid. Requires `h < inradius / 4`.
    pub fn new(domain: &ConvexDomain, h: f64) -> Result<Self> {
        let inradius = domain.inradius();
        if !(h > 0.0) || !(h < inradius / 4.0) {
            return Err(Error::GridTooCoarse { h, inradius });
        }
        let (lo, hi) = domain.bounding_box();
        let count = |a: f64, b: f64| ((b - a) / h + 1e-9).floor() as usize + 1;
        let nx = count(lo[0], hi[0]);
        let ny = if domain.dim() == 1 { 1 } else { count(lo[1], hi[1]) };
        let tol = 1e-10 * domain.scale();
        let point = |i: usize, j: usize| [lo[0] + i as f64 * h, lo[1] + j as f64 * h];
        let mut classes = vec![NodeClass::Exterior; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let l = domain.level(point(i, j));
                classes[j * nx + i] = if l < -tol {
                    NodeClass::Interior
                } else if l <= tol {
                    NodeClass::Boundary
                } else {
                    NodeClass::Exterior
                };
            }
        }
        let empty = Arm { length: h, node: None };
        let mut arms = vec![[empty; 4]; nx * ny];
        let axes = if ny == 1 { 2 } else { 4 };
        let mut inside = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                if classes[idx] != NodeClass::Interior {
                    continue;
                }
                inside.push(idx);
                let x = point(i, j);
                let mut adjacent = false;
                for (a, dir) in AXES.iter().enumerate().take(axes) {
                    let (ii, jj) = (i as i64 + dir[0], j as i64 + dir[1]);
                    let nb = (ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < ny)
                        .then(|| jj as usize * nx + ii as usize)
                        .filter(|&k| classes[k].is_inside());
                    arms[idx][a] = match nb {
                        Some(k) => Arm { length: h, node: Some(k) },
                        None => {
                            adjacent = true;
                            let t = domain.ray_exit(x, [dir[0] as f64, dir[1] as f64]);
                            Arm { length: t.clamp(f64::MIN_POSITIVE, h), node: None }
                        }
                    };
                }
                if adjacent {
                    classes[idx] = NodeClass::BoundaryAdjacent;
                }
            }
        }
        Ok(Grid { domain: domain.clone(), h, origin: lo, nx, ny, classes, arms, inside })
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    /// `(nx, ny)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn node_count(&self) -> usize {
        self.classes.len()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Lattice coordinates `(i, j)` of a node.
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.classes[idx]
    }

    /// Arms in the order `+x, -x, +y, -y`; meaningful for inside nodes only.
    pub fn arms(&self, idx: usize) -> &[Arm; 4] {
        &self.arms[idx]
    }

    /// Inside nodes (interior and boundary-adjacent) in lexicographic order.
    pub fn inside_nodes(&self) -> &[usize] {
        &self.inside
    }

    /// Number of nodes carrying an unknown.
    pub fn inside_count(&self) -> usize {
        self.inside.len()
    }

    /// Lattice node `idx + (di, dj)` if it exists.
    pub fn offset(&self, idx: usize, di: i64, dj: i64) -> Option<usize> {
        let (i, j) = self.coords(idx);
        let (ii, jj) = (i as i64 + di, j as i64 + dj);
        (ii >= 0 && jj >= 0 && (ii as usize) < self.nx && (jj as usize) < self.ny)
            .then(|| self.index(ii as usize, jj as usize))
    }

    /// Writes `x,y,class` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,class")?;
        for idx in 0..self.node_count() {
            let x = self.point(idx);
            writeln!(out, "{},{},{}", x[0], x[1], self.classes[idx])?;
        }
        Ok(())
    }
}

/// Convenience wrapper around [`Grid::new`].
pub fn build_grid(domain: &ConvexDomain, h: f64) -> Result<Grid> {
    Grid::new(domain, h)
}
