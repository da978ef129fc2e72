//! Finite differences for `F(grad u, D^2 u) = f` with zero boundary data.
//!
//! At an inside node the operator is written in flux form
//!
//! ```text
//! -[ (p-2)/p / (alpha+1) * d_e(|d_e u|^alpha d_e u) + (1/p) |grad u|^alpha lap_h u ]
//! ```
//!
//! where `e` is the gradient direction, `d_e` a one-sided difference along a
//! stencil ray and `lap_h` the five-point Laplacian. Arms that leave the
//! domain are cut at the boundary (Shortley–Weller), so the zero boundary
//! value sits on the true boundary.
//!
//! The aligned term is rebuilt from the fixed lattice directions in one of
//! three ways, see [`Interpolation`]. Each level is solved by Newton's method
//! with pseudo-transient continuation, and levels are nested from coarse to
//! fine.

use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use serde::{Deserialize, Serialize};

use crate::domain::{Arm, Grid, NodeClass, Point};
use crate::error::{Error, Result};
use crate::operator::OperatorParams;

/// Discretization and iteration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    /// Number `m` of stencil angles `j pi / m`.
    pub directions: usize,
    /// How the aligned term is rebuilt between stencil directions.
    pub interpolation: Interpolation,
    /// Gradient-degeneracy threshold; `None` means `h^2`.
    pub gamma: Option<f64>,
    /// Pseudo-time step, relative to the diagonal, taken after a rejected
    /// Newton step.
    pub pseudo_time_step: f64,
    /// Newton steps per level.
    pub max_iterations: usize,
    /// Target for `max |f - F_h u|` over checked nodes.
    pub tolerance: f64,
}

/// Reconstruction of the aligned term from the stencil directions.
///
/// `Extremal` takes `max_j min_i` over pairs of stencil rays of the flux
/// difference between ascent along ray `j` and descent along ray `i`. It is
/// monotone and continuous, with an angular error of order `1/m` at fixed `m`.
///
/// `Linear` blends the two directions bracketing the gradient with positive
/// weights. The weights follow the gradient angle, so raising a neighbor can
/// still raise the node value, and the blend keeps an `O(1)` share of the
/// tangential curvature at fixed `m`.
///
/// `Trigonometric` fits `<e, X e>` exactly through three directions and
/// rescales each term by `cos^-alpha` of its angle to the gradient. It is
/// consistent but has small negative weights. It is started from the
/// `Extremal` solution, and when it fails to converge the `Extremal` solution
/// is returned with [`SolveReport::monotone_fallback`] set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Extremal,
    Linear,
    #[default]
    Trigonometric,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig { directions: 8, interpolation: Interpolation::default(), gamma: None, pseudo_time_step: 100.0, max_iterations: 1000, tolerance: 1e-6 }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_RAYS / 2).contains(&self.directions) {
            return Err(Error::InvalidArgument(format!("direction count {} must lie in 2..={}", self.directions, MAX_RAYS / 2)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::InvalidArgument(format!("degeneracy threshold {g} must be > 0")));
            }
        }
        if !(self.pseudo_time_step > 0.0 && self.pseudo_time_step.is_finite()) {
            return Err(Error::InvalidArgument(format!("pseudo-time step {} must be finite and > 0", self.pseudo_time_step)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be > 0", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Values on every grid node; boundary and exterior nodes hold 0.
#[derive(Clone, Debug)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        GridField { grid: Arc::clone(grid), values: vec![0.0; grid.node_count()] }
    }

    /// Samples `f` at inside nodes; other nodes get 0.
    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(Point) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        for &k in grid.inside_nodes() {
            field.values[k] = f(grid.point(k));
        }
        field
    }

    /// Constant on inside nodes.
    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Wraps raw node values, zeroing non-inside nodes.
    pub fn from_values(grid: &Arc<Grid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch { expected: grid.node_count(), got: values.len() });
        }
        for (k, v) in values.iter_mut().enumerate() {
            if !grid.class(k).is_inside() {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite value at node {:?}", grid.coords(k))));
            }
        }
        Ok(GridField { grid: Arc::clone(grid), values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Sets an inside node value.
    pub fn set(&mut self, idx: usize, v: f64) {
        debug_assert!(self.grid.class(idx).is_inside());
        self.values[idx] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        let mut out = self.clone();
        for &k in self.grid.inside_nodes() {
            out.values[k] = f(self.values[k]);
        }
        out
    }

    /// Maximum over inside nodes (0 for an empty set).
    pub fn sup(&self) -> f64 {
        self.grid.inside_nodes().iter().map(|&k| self.values[k]).fold(0.0, f64::max)
    }

    /// Minimum over inside nodes.
    pub fn inf(&self) -> f64 {
        self.grid.inside_nodes().iter().map(|&k| self.values[k]).fold(f64::INFINITY, f64::min)
    }

    /// Inside node with the largest value.
    pub fn argmax(&self) -> Option<usize> {
        self.grid.inside_nodes().iter().copied().max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
    }

    /// Bilinear interpolation with boundary and exterior corners read as 0.
    pub fn sample(&self, x: Point) -> f64 {
        let g = &self.grid;
        let h = g.h();
        let o = g.origin();
        let (nx, ny) = g.shape();
        let fx = ((x[0] - o[0]) / h).clamp(0.0, (nx - 1) as f64);
        let i0 = (fx.floor() as usize).min(nx.saturating_sub(2));
        let tx = fx - i0 as f64;
        if ny == 1 {
            let v0 = self.values[i0];
            let v1 = self.values.get(i0 + 1).copied().unwrap_or(0.0);
            return (1.0 - tx) * v0 + tx * v1;
        }
        let fy = ((x[1] - o[1]) / h).clamp(0.0, (ny - 1) as f64);
        let j0 = (fy.floor() as usize).min(ny - 2);
        let ty = fy - j0 as f64;
        let v = |i: usize, j: usize| self.values[g.index(i, j)];
        (1.0 - tx) * (1.0 - ty) * v(i0, j0)
            + tx * (1.0 - ty) * v(i0 + 1, j0)
            + (1.0 - tx) * ty * v(i0, j0 + 1)
            + tx * ty * v(i0 + 1, j0 + 1)
    }

    /// Writes `x,y,u` rows for every non-exterior node.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &str) -> Result<()> {
        writeln!(out, "x,y,{header}")?;
        for k in 0..self.grid.node_count() {
            if self.grid.class(k) != NodeClass::Exterior {
                let x = self.grid.point(k);
                writeln!(out, "{},{},{}", x[0], x[1], self.values[k])?;
            }
        }
        Ok(())
    }

    /// Reads a dump written by [`GridField::write_csv`] back onto `grid`.
    /// Rows are matched to nodes by position; every inside node must appear.
    pub fn read_csv<R: BufRead>(grid: &Arc<Grid>, input: R) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::InvalidArgument(format!("field dump line {line}: {why}"));
        let (h, o) = (grid.h(), grid.origin());
        let (nx, ny) = grid.shape();
        let mut values = vec![0.0; grid.node_count()];
        let mut seen = vec![false; grid.node_count()];
        for (n, line) in input.lines().enumerate().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(n + 1, &e.to_string()))?;
            let [x, y, v] = cols[..] else {
                return Err(bad(n + 1, "expected three columns"));
            };
            let fi = (x - o[0]) / h;
            let fj = if ny == 1 { 0.0 } else { (y - o[1]) / h };
            let (i, j) = (fi.round(), fj.round());
            if (fi - i).abs() > 1e-6 || (fj - j).abs() > 1e-6 || i < 0.0 || j < 0.0 || i as usize >= nx || j as usize >= ny {
                return Err(bad(n + 1, "point is not a node of the grid"));
            }
            let k = grid.index(i as usize, j as usize);
            values[k] = v;
            seen[k] = true;
        }
        if let Some(&k) = grid.inside_nodes().iter().find(|&&k| !seen[k]) {
            return Err(Error::InvalidArgument(format!("field dump misses node {:?}", grid.coords(k))));
        }
        Self::from_values(grid, values)
    }
}

/// A lattice stencil direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    pub step: [i64; 2],
    pub unit: [f64; 2],
}

/// Lattice directions approximating the angles `j pi / m`.
///
/// Each angle snaps to the primitive lattice vector of sup-norm at most
/// `max(1, ceil(m/4))` nearest in angle; duplicates are dropped.
pub fn stencil_directions(m: usize, dim: usize) -> Vec<Direction> {
    if dim == 1 {
        return vec![Direction { step: [1, 0], unit: [1.0, 0.0] }];
    }
    let reach = (m.div_ceil(4)).max(1) as i64;
    let mut candidates = Vec::new();
    for a in -reach..=reach {
        for b in 0..=reach {
            if (b == 0 && a <= 0) || gcd(a.unsigned_abs(), b as u64) != 1 {
                continue;
            }
            candidates.push([a, b]);
        }
    }
    let mut out: Vec<Direction> = Vec::new();
    for j in 0..m {
        let theta = std::f64::consts::PI * j as f64 / m as f64;
        let best = candidates
            .iter()
            .min_by(|u, v| {
                let du = angle_gap((u[1] as f64).atan2(u[0] as f64), theta);
                let dv = angle_gap((v[1] as f64).atan2(v[0] as f64), theta);
                du.total_cmp(&dv).then((u[0] * u[0] + u[1] * u[1]).cmp(&(v[0] * v[0] + v[1] * v[1])))
            })
            .copied()
            .expect("candidate set is nonempty");
        if !out.iter().any(|d| d.step == best) {
            let len = ((best[0] * best[0] + best[1] * best[1]) as f64).sqrt();
            out.push(Direction { step: best, unit: [best[0] as f64 / len, best[1] as f64 / len] });
        }
    }
    out.sort_by(|a, b| a.unit[1].atan2(a.unit[0]).total_cmp(&b.unit[1].atan2(b.unit[0])));
    out
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % std::f64::consts::PI;
    d.min(std::f64::consts::PI - d)
}

/// Precomputed stencils for one grid, operator and configuration.
#[derive(Clone, Debug)]
pub struct Scheme {
    grid: Arc<Grid>,
    interpolation: Interpolation,
    params: OperatorParams,
    cfg: SchemeConfig,
    gamma: f64,
    dirs: Vec<Direction>,
    flux: Flux,
    /// Angles of `dirs` in `[0, pi)`, increasing.
    angles: Vec<f64>,
    /// Forward and backward arms per (inside node, direction).
    rays: Vec<[Arm; 2]>,
    /// Position of each node in `grid.inside_nodes()`, or `usize::MAX`.
    local: Vec<usize>,
}

/// Affine form `A - B u_center` of a second difference.
#[derive(Clone, Copy, Debug, Default)]
struct Affine {
    a: f64,
    b: f64,
}

impl Affine {
    fn eval(self, center: f64) -> f64 {
        self.a - self.b * center
    }

    fn add(self, other: Affine, w: f64) -> Affine {
        Affine { a: self.a + w * other.a, b: self.b + w * other.b }
    }
}

fn arm_value(u: &[f64], arm: &Arm) -> f64 {
    arm.node.map_or(0.0, |k| u[k])
}

/// Second difference with unequal arms `a` (forward) and `b` (backward).
fn second_difference(u: &[f64], fwd: &Arm, bwd: &Arm) -> Affine {
    let (a, b) = (fwd.length, bwd.length);
    let s = 2.0 / (a + b);
    Affine { a: s * (arm_value(u, fwd) / a + arm_value(u, bwd) / b), b: s * (1.0 / a + 1.0 / b) }
}

/// Derivative of the quadratic through the three arm points.
fn first_difference(u: &[f64], center: f64, fwd: &Arm, bwd: &Arm) -> f64 {
    let (a, b) = (fwd.length, bwd.length);
    (b * b * (arm_value(u, fwd) - center) + a * a * (center - arm_value(u, bwd))) / (a * b * (a + b))
}

/// The flux `|s|^alpha s` and its derivative.
#[derive(Clone, Copy, Debug)]
struct Flux {
    alpha: f64,
    int: Option<i32>,
}

impl Flux {
    fn new(alpha: f64) -> Self {
        let int = (alpha.fract() == 0.0 && alpha <= 8.0).then_some(alpha as i32);
        Flux { alpha, int }
    }

    fn pow(self, s: f64) -> f64 {
        match self.int {
            Some(0) => 1.0,
            Some(k) => s.abs().powi(k),
            None => s.abs().powf(self.alpha),
        }
    }

    fn value(self, s: f64) -> f64 {
        self.pow(s) * s
    }

    fn slope(self, s: f64) -> f64 {
        (self.alpha + 1.0) * self.pow(s)
    }
}

/// Aligned term `cd (flux((uf - v)/a) - flux((v - ub)/b))` along one
/// direction; a discrete `(1/(alpha+1)) d/ds (|u_s|^alpha u_s)`.
#[derive(Clone, Copy, Debug, Default)]
struct Aligned {
    cd: f64,
    a: f64,
    b: f64,
    uf: f64,
    ub: f64,
    nf: Option<usize>,
    nb: Option<usize>,
}

impl Aligned {
    fn value(&self, flux: Flux, v: f64) -> f64 {
        self.cd * (flux.value((self.uf - v) / self.a) - flux.value((v - self.ub) / self.b))
    }

    /// Derivative of `-value` in `v` (nonnegative).
    fn slope(&self, flux: Flux, v: f64) -> f64 {
        self.cd * (flux.slope((self.uf - v) / self.a) / self.a + flux.slope((v - self.ub) / self.b) / self.b)
    }

    /// Adds `w * d(-value)/d(neighbor)` entries.
    fn push_neighbors(&self, flux: Flux, v: f64, w: f64, row: &mut Vec<(usize, f64)>) {
        if let Some(n) = self.nf {
            row.push((n, -w * self.cd * flux.slope((self.uf - v) / self.a) / self.a));
        }
        if let Some(n) = self.nb {
            row.push((n, -w * self.cd * flux.slope((v - self.ub) / self.b) / self.b));
        }
    }
}

/// The node equation with neighbors and directions frozen, as a function of
/// the center value `v`:
///
/// `F(v) = -[ lam (w1 T1 + w2 T2) + (1 - lam) max_k Tk + wt S(v)^alpha (A - B v) ]`
///
/// `T1, T2` are the aligned terms of the two stencil directions bracketing the
/// gradient, `S(v)` the steepest downhill slope to the stored neighbors, and
/// `lam = min(1, |grad_h u| / gamma)` blends toward the max-direction rule
/// where the gradient degenerates.
#[derive(Clone, Debug)]
struct NodeModel {
    flux: Flux,
    pair: [(f64, Aligned); 4],
    /// Derivatives of the `pair` weights in the gradient angle.
    dweights: [f64; 4],
    lam: f64,
    all: Vec<Aligned>,
    wt: f64,
    lap: Affine,
    /// Laplacian coefficient and node of each axis neighbor.
    lap_nodes: [(f64, Option<usize>); 4],
    /// `(value, distance, node)` of the neighbors entering `S`.
    down: [(f64, f64, Option<usize>); 8],
    /// All stencil rays as `(value, length, node)`; when nonempty the aligned
    /// term uses the steepest ascent and descent among them.
    rays: Vec<(f64, f64, Option<usize>)>,
    /// `(p-2)/p / (alpha+1)`.
    ext_weight: f64,
    degenerate: bool,
}

impl NodeModel {
    /// Active ascent and descent rays `(slope, length, node)` of
    /// `max_j min_i c_ij (flux(a_j) - flux(d_i))`, `c_ij = 2 / (l_i + l_j)`.
    #[allow(clippy::needless_range_loop)]
    fn extremes(&self, v: f64) -> [(f64, f64, Option<usize>); 2] {
        let flux = self.flux;
        let n = self.rays.len();
        let mut up = [0.0; MAX_RAYS];
        let mut down = [0.0; MAX_RAYS];
        for (i, &(u, l, _)) in self.rays.iter().enumerate() {
            up[i] = (u - v) / l;
            down[i] = (v - u) / l;
        }
        let fup = up.map(|s| flux.value(s));
        let fdown = down.map(|s| flux.value(s));
        let (mut best, mut pick) = (f64::NEG_INFINITY, (0, 0));
        for j in 0..n {
            let lj = self.rays[j].1;
            let (mut worst, mut arg) = (f64::INFINITY, 0);
            for i in 0..n {
                let t = (fup[j] - fdown[i]) / (self.rays[i].1 + lj);
                if t < worst {
                    (worst, arg) = (t, i);
                }
            }
            if worst > best {
                (best, pick) = (worst, (j, arg));
            }
        }
        let (j, i) = pick;
        [(up[j], self.rays[j].1, self.rays[j].2), (down[i], self.rays[i].1, self.rays[i].2)]
    }

    /// Extremal term and its derivative in `-v`.
    fn extremal(&self, v: f64) -> (f64, f64) {
        let [(sp, lp, _), (sm, lm, _)] = self.extremes(v);
        let cd = self.ext_weight * 2.0 / (lp + lm);
        let flux = self.flux;
        (
            cd * (flux.value(sp) - flux.value(sm)),
            cd * (flux.slope(sp) / lp + flux.slope(sm) / lm),
        )
    }

    /// Steepest downhill slope and the distance realizing it.
    fn slope(&self, v: f64) -> (f64, f64) {
        self.steepest(v).map_or((0.0, f64::INFINITY), |(s, d, _)| (s, d))
    }

    fn steepest(&self, v: f64) -> Option<(f64, f64, Option<usize>)> {
        let mut best: Option<(f64, f64, Option<usize>)> = None;
        for &(u, d, n) in &self.down {
            let s = (v - u) / d;
            if s > best.map_or(0.0, |b| b.0) {
                best = Some((s, d, n));
            }
        }
        best
    }

    /// Off-diagonal Jacobian entries `dF/du_j`, with gradient-dependent
    /// weights held fixed.
    fn jacobian_row(&self, v: f64, row: &mut Vec<(usize, f64)>) {
        if !self.rays.is_empty() {
            let [(sp, lp, np), (sm, lm, nm)] = self.extremes(v);
            let cd = self.ext_weight * 2.0 / (lp + lm);
            if let Some(n) = np {
                row.push((n, -cd * self.flux.slope(sp) / lp));
            }
            if let Some(n) = nm {
                row.push((n, -cd * self.flux.slope(sm) / lm));
            }
        } else if self.lam > 0.0 {
            for (w, t) in &self.pair {
                if *w != 0.0 {
                    t.push_neighbors(self.flux, v, self.lam * w, row);
                }
            }
        }
        if self.rays.is_empty() && self.lam < 1.0 {
            if let Some((_, t)) = self.max_term(v) {
                t.push_neighbors(self.flux, v, 1.0 - self.lam, row);
            }
        }
        if self.wt > 0.0 {
            let steep = self.steepest(v);
            let sa = self.flux.pow(steep.map_or(0.0, |s| s.0));
            for &(c, n) in &self.lap_nodes {
                if let Some(n) = n {
                    row.push((n, -self.wt * sa * c));
                }
            }
            let alpha = self.flux.alpha;
            if let Some((s, d, Some(n))) = steep {
                if alpha > 0.0 {
                    row.push((n, self.wt * alpha * sa / s / d * self.lap.eval(v)));
                }
            }
        }
    }

    fn max_term(&self, v: f64) -> Option<(f64, &Aligned)> {
        let mut best: Option<(f64, &Aligned)> = None;
        for t in &self.all {
            let x = t.value(self.flux, v);
            if best.is_none_or(|(b, _)| x > b) {
                best = Some((x, t));
            }
        }
        best
    }

    fn value(&self, v: f64) -> f64 {
        let mut out = 0.0;
        if !self.rays.is_empty() {
            out += self.extremal(v).0;
        } else if self.lam > 0.0 {
            out += self.lam * self.pair.iter().map(|(w, t)| w * t.value(self.flux, v)).sum::<f64>();
        }
        if self.rays.is_empty() && self.lam < 1.0 {
            out += (1.0 - self.lam) * self.max_term(v).map_or(0.0, |(x, _)| x);
        }
        if self.wt > 0.0 {
            out += self.wt * self.flux.pow(self.slope(v).0) * self.lap.eval(v);
        }
        -out
    }

    fn derivative(&self, v: f64) -> f64 {
        let mut out = 0.0;
        if !self.rays.is_empty() {
            out += self.extremal(v).1;
        } else if self.lam > 0.0 {
            out += self.lam * self.pair.iter().map(|(w, t)| w * t.slope(self.flux, v)).sum::<f64>();
        }
        if self.rays.is_empty() && self.lam < 1.0 {
            out += (1.0 - self.lam) * self.max_term(v).map_or(0.0, |(_, t)| t.slope(self.flux, v));
        }
        if self.wt > 0.0 {
            let (s, d) = self.slope(v);
            let alpha = self.flux.alpha;
            out += self.wt * self.flux.pow(s) * self.lap.b;
            if alpha > 0.0 && s > 0.0 {
                out -= self.wt * alpha * self.flux.pow(s) / s / d * self.lap.eval(v);
            }
        }
        out
    }
}

impl Scheme {
    pub fn new(grid: &Arc<Grid>, params: &OperatorParams, cfg: &SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        let params = params.with_dim(grid.dim());
        let dirs = stencil_directions(cfg.directions, grid.dim());
        let inside = grid.inside_nodes();
        let mut local = vec![usize::MAX; grid.node_count()];
        for (l, &k) in inside.iter().enumerate() {
            local[k] = l;
        }
        let domain = grid.domain();
        let h = grid.h();
        let mut rays = Vec::with_capacity(inside.len() * dirs.len());
        for &k in inside {
            let x = grid.point(k);
            for d in &dirs {
                let len = h * ((d.step[0] * d.step[0] + d.step[1] * d.step[1]) as f64).sqrt();
                let arm = |sign: i64| {
                    match grid.offset(k, sign * d.step[0], sign * d.step[1]).filter(|&n| grid.class(n).is_inside()) {
                        Some(n) => Arm { length: len, node: Some(n) },
                        None => {
                            let dir = [sign as f64 * d.unit[0], sign as f64 * d.unit[1]];
                            Arm { length: domain.ray_exit(x, dir).clamp(f64::MIN_POSITIVE, len), node: None }
                        }
                    }
                };
                rays.push([arm(1), arm(-1)]);
            }
        }
        let gamma = cfg.gamma.unwrap_or(h * h);
        let flux = Flux::new(params.alpha);
        let angles = dirs.iter().map(|d| d.unit[1].atan2(d.unit[0])).collect();
        Ok(Scheme { grid: Arc::clone(grid), interpolation: cfg.interpolation, params, cfg: cfg.clone(), gamma, flux, angles, dirs, rays, local })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn params(&self) -> &OperatorParams {
        &self.params
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn directions(&self) -> &[Direction] {
        &self.dirs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn rays(&self, l: usize) -> &[[Arm; 2]] {
        let m = self.dirs.len();
        &self.rays[l * m..(l + 1) * m]
    }

    /// Whether every stencil arm at the inside node `k` ends on an inside
    /// node, so no boundary datum enters `F_h` there.
    pub fn stencil_is_inside(&self, k: usize) -> bool {
        let axes = if self.grid.dim() == 1 { 2 } else { 4 };
        self.local.get(k).is_some_and(|&l| l != usize::MAX)
            && self.grid.arms(k)[..axes].iter().all(|a| a.node.is_some())
            && self.rays(self.local[k]).iter().flatten().all(|a| a.node.is_some())
    }

    /// Centered (Shortley–Weller) gradient at an inside node.
    pub fn gradient(&self, u: &[f64], k: usize) -> [f64; 2] {
        let arms = self.grid.arms(k);
        let c = u[k];
        let gx = first_difference(u, c, &arms[0], &arms[1]);
        let gy = if self.grid.dim() == 1 { 0.0 } else { first_difference(u, c, &arms[2], &arms[3]) };
        [gx, gy]
    }

    fn laplacian(&self, u: &[f64], k: usize) -> Affine {
        let arms = self.grid.arms(k);
        let lx = second_difference(u, &arms[0], &arms[1]);
        if self.grid.dim() == 1 {
            lx
        } else {
            lx.add(second_difference(u, &arms[2], &arms[3]), 1.0)
        }
    }

    fn aligned(&self, u: &[f64], k: usize, dir: usize) -> (Aligned, [Arm; 2]) {
        let [fwd, bwd] = self.rays(self.local[k])[dir];
        let (a, b) = (fwd.length, bwd.length);
        let cd = self.params.p.directional_weight() / (self.params.alpha + 1.0) * 2.0 / (a + b);
        (Aligned { cd, a, b, uf: arm_value(u, &fwd), ub: arm_value(u, &bwd), nf: fwd.node, nb: bwd.node }, [fwd, bwd])
    }

    /// Stencil directions bracketing the angle of `g` and their weights.
    fn bracket(&self, g: [f64; 2]) -> [(usize, f64); 2] {
        let m = self.dirs.len();
        let pi = std::f64::consts::PI;
        let theta = g[1].atan2(g[0]).rem_euclid(pi);
        for i in 0..m {
            let t0 = self.angles[i];
            let t1 = if i + 1 < m { self.angles[i + 1] } else { self.angles[0] + pi };
            let t = if theta < t0 { theta + pi } else { theta };
            if t >= t0 && t <= t1 {
                let w = (t - t0) / (t1 - t0);
                return [(i, 1.0 - w), ((i + 1) % m, w)];
            }
        }
        [(0, 1.0), (0, 0.0)]
    }

    /// Stencil directions and weights reconstructing the aligned term at
    /// gradient angle `theta`: the two bracketing directions and their outer
    /// neighbors.
    fn weights(&self, theta: f64) -> ([usize; 4], [f64; 4]) {
        if self.dirs.len() == 1 {
            return ([0; 4], [0.0, 1.0, 0.0, 0.0]);
        }
        let [(i1, _), (i2, _)] = self.bracket([theta.cos(), theta.sin()]);
        let m = self.dirs.len();
        let idx = [(i1 + m - 1) % m, i1, i2, (i2 + 1) % m];
        (idx, self.weights_in(theta, idx))
    }

    /// Weights on `idx` for angle `theta`, with `idx[1..3]` bracketing it.
    fn weights_in(&self, theta: f64, idx: [usize; 4]) -> [f64; 4] {
        let alpha = self.params.alpha;
        let (c, s) = (theta.cos(), theta.sin());
        let tilt = |i: usize| {
            let e = self.dirs[i].unit;
            (e[0] * c + e[1] * s).abs().max(0.25).powf(-alpha)
        };
        let pi = std::f64::consts::PI;
        let gap = (self.angles[idx[2]] - self.angles[idx[1]]).rem_euclid(pi);
        let offset = theta - self.angles[idx[1]];
        let w = (offset - pi * (offset / pi).round()) / gap;
        if self.interpolation == Interpolation::Linear {
            return [0.0, 1.0 - w, w, 0.0];
        }
        // Trigonometric interpolation in 2 psi through three directions; the
        // two choices of the outer direction are blended across the bracket.
        let col = |i: usize| {
            let e = self.dirs[i].unit;
            let psi = e[1].atan2(e[0]);
            Vector3::new(1.0, (2.0 * psi).cos(), (2.0 * psi).sin())
        };
        let target = Vector3::new(1.0, (2.0 * theta).cos(), (2.0 * theta).sin());
        let solve = |a: usize, b: usize, d: usize| {
            Matrix3::from_columns(&[col(idx[a]), col(idx[b]), col(idx[d])]).lu().solve(&target).unwrap_or_else(Vector3::zeros)
        };
        let lo = solve(0, 1, 2);
        let hi = solve(1, 2, 3);
        let beta = [(1.0 - w) * lo[0], (1.0 - w) * lo[1] + w * hi[0], (1.0 - w) * lo[2] + w * hi[1], w * hi[2]];
        [0, 1, 2, 3].map(|j| beta[j] * tilt(idx[j]))
    }

    fn model(&self, u: &[f64], k: usize) -> NodeModel {
        let g = self.gradient(u, k);
        let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let lam = if self.dirs.len() == 1 { 1.0 } else { (gnorm / self.gamma).min(1.0) };
        let theta = g[1].atan2(g[0]);
        let (idx, wts) = self.weights(theta);
        let dweights = if self.dirs.len() == 1 {
            [0.0; 4]
        } else {
            let eps = 1e-6;
            let wp = self.weights_in(theta + eps, idx);
            let wm = self.weights_in(theta - eps, idx);
            [0, 1, 2, 3].map(|j| (wp[j] - wm[j]) / (2.0 * eps))
        };
        let t0 = self.aligned(u, k, idx[0]).0;
        let (t1, r1) = self.aligned(u, k, idx[1]);
        let (t2, r2) = self.aligned(u, k, idx[2]);
        let t3 = self.aligned(u, k, idx[3]).0;
        let all = if lam < 1.0 { (0..self.dirs.len()).map(|i| self.aligned(u, k, i).0).collect() } else { Vec::new() };
        let wt = self.params.p.trace_weight();
        let arms = self.grid.arms(k);
        let axes = if self.grid.dim() == 1 { 2 } else { 4 };
        let pair = |arm: &Arm| (arm_value(u, arm), arm.length, arm.node);
        let mut down = [pair(&r1[0]); 8];
        for (slot, arm) in down.iter_mut().zip(arms[..axes].iter().chain(&r1).chain(&r2)) {
            *slot = pair(arm);
        }
        let mut lap_nodes = [(0.0, None); 4];
        if wt > 0.0 {
            for axis in 0..axes / 2 {
                let (fa, ba) = (&arms[2 * axis], &arms[2 * axis + 1]);
                let s = 2.0 / (fa.length + ba.length);
                lap_nodes[2 * axis] = (s / fa.length, fa.node);
                lap_nodes[2 * axis + 1] = (s / ba.length, ba.node);
            }
        }
        let rays = if self.interpolation == Interpolation::Extremal && self.params.p.directional_weight() > 0.0 {
            self.rays(self.local[k]).iter().flat_map(|r| r.iter().map(|a| (arm_value(u, a), a.length, a.node))).collect()
        } else {
            Vec::new()
        };
        NodeModel {
            rays,
            ext_weight: self.params.p.directional_weight() / (self.params.alpha + 1.0),
            flux: self.flux,
            pair: [(wts[0], t0), (wts[1], t1), (wts[2], t2), (wts[3], t3)],
            dweights,
            lam,
            all,
            wt,
            lap: if wt > 0.0 { self.laplacian(u, k) } else { Affine::default() },
            lap_nodes,
            down,
            degenerate: gnorm <= self.gamma,
        }
    }

    /// `F_h u` at an inside node.
    pub fn discrete_f(&self, u: &GridField, node: usize) -> Result<f64> {
        if node >= self.grid.node_count() || !self.grid.class(node).is_inside() {
            return Err(Error::NotInterior(self.grid.coords(node.min(self.grid.node_count() - 1))));
        }
        Ok(self.model(u.values(), node).value(u.values()[node]))
    }

    fn node_residual(&self, u: &[f64], f: f64, k: usize) -> f64 {
        f - self.model(u, k).value(u[k])
    }

    /// `max |f - F_h u|` over inside nodes.
    pub fn residual_norm(&self, u: &GridField, f: &GridField) -> f64 {
        self.grid
            .inside_nodes()
            .iter()
            .map(|&k| self.node_residual(u.values(), f.values()[k], k).abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise residual `f - F_h u` per node (0 off the inside set).
    pub fn node_residuals(&self, u: &GridField, f: &GridField) -> GridField {
        let mut out = GridField::zeros(&self.grid);
        for &k in self.grid.inside_nodes() {
            out.values[k] = self.node_residual(u.values(), f.values()[k], k);
        }
        out
    }

    /// Inside nodes where `|grad_h u| <= gamma`.
    pub fn degenerate_nodes(&self, u: &GridField) -> Vec<(usize, usize)> {
        self.grid
            .inside_nodes()
            .iter()
            .filter(|&&k| self.model(u.values(), k).degenerate)
            .map(|&k| self.grid.coords(k))
            .collect()
    }

    /// Residual vector `f - F_h u` over inside nodes (local numbering).
    fn residual_vector(&self, u: &[f64], f: &[f64]) -> Vec<f64> {
        self.grid.inside_nodes().iter().map(|&k| f[k] - self.model(u, k).value(u[k])).collect()
    }

    /// Entries from the dependence of the bracket weights on the gradient
    /// angle; the center node appears as `k` itself.
    fn angle_sensitivity(&self, u: &[f64], k: usize, model: &NodeModel, row: &mut Vec<(usize, f64)>) {
        if self.interpolation != Interpolation::Trigonometric || model.dweights.iter().all(|w| *w == 0.0) || model.lam <= 0.0 {
            return;
        }
        let g = self.gradient(u, k);
        let g2 = g[0] * g[0] + g[1] * g[1];
        if g2 <= 0.0 {
            return;
        }
        let v = u[k];
        // dF/dtheta; F carries a leading minus sign.
        let dtheta = -model.lam * model.pair.iter().zip(&model.dweights).map(|((_, t), dw)| dw * t.value(model.flux, v)).sum::<f64>();
        let arms = self.grid.arms(k);
        for (axis, dth) in [(0, -g[1] / g2), (1, g[0] / g2)] {
            let (fwd, bwd) = (&arms[2 * axis], &arms[2 * axis + 1]);
            let (a, b) = (fwd.length, bwd.length);
            let scale = dtheta * dth;
            if let Some(n) = fwd.node {
                row.push((n, scale * b / (a * (a + b))));
            }
            if let Some(n) = bwd.node {
                row.push((n, -scale * a / (b * (a + b))));
            }
            row.push((k, scale * (a * a - b * b) / (a * b * (a + b))));
        }
    }

    /// Newton correction `J d = r` with the frozen-weight Jacobian.
    fn newton_step(&self, u: &[f64], r: &[f64], shift: f64) -> Option<Vec<f64>> {
        use faer::linalg::solvers::Solve;
        use faer::sparse::{SparseColMat, Triplet};
        let nodes = self.grid.inside_nodes();
        let n = nodes.len();
        let mut triplets = Vec::with_capacity(n * 12);
        let mut row = Vec::with_capacity(24);
        for (i, &k) in nodes.iter().enumerate() {
            let model = self.model(u, k);
            let v = u[k];
            let diag = model.derivative(v);
            triplets.push(Triplet { row: i, col: i, val: diag + shift * diag.abs() });
            row.clear();
            model.jacobian_row(v, &mut row);
            self.angle_sensitivity(u, k, &model, &mut row);
            for &(node, val) in &row {
                let j = self.local[node];
                if j != usize::MAX && val != 0.0 {
                    triplets.push(Triplet { row: i, col: j, val });
                }
            }
        }
        let jac = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).ok()?;
        let lu = jac.sp_lu().ok()?;
        let mut rhs = faer::Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        lu.solve_in_place(rhs.as_mut());
        let d: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
        d.iter().all(|x| x.is_finite()).then_some(d)
    }

    /// Newton with pseudo-transient continuation. A rejected step adds a
    /// pseudo-time term to the diagonal, which shrinks again as the residual
    /// falls.
    fn iterate_newton(&self, u: &mut GridField, f: &GridField, tolerance: f64, budget: usize) -> Result<SolveStats> {
        let nodes = self.grid.inside_nodes();
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let merit = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut r = self.residual_vector(&u.values, &f.values);
        let mut rn = norm(&r);
        let mut rm = merit(&r);
        let mut used = 0;
        let mut shift = 0.0;
        while used < budget {
            if rn <= tolerance {
                return Ok(SolveStats { steps: used, residual: rn, fallback: false });
            }
            used += 1;
            let trial = self.newton_step(&u.values, &r, shift).map(|d| {
                let mut trial = u.values.clone();
                for (i, &k) in nodes.iter().enumerate() {
                    trial[k] += d[i];
                }
                trial
            });
            let next = trial.map(|t| {
                let rt = self.residual_vector(&t, &f.values);
                let rtm = merit(&rt);
                let rtn = norm(&rt);
                (t, rt, rtm, rtn)
            });
            match next {
                Some((t, rt, rtm, rtn)) if rtm < rm || rtn < rn => {
                    // Switched evolution relaxation: the pseudo-time step
                    // grows as the residual falls.
                    shift *= (rtm / rm).min(rtn / rn);
                    if shift < 1e-6 {
                        shift = 0.0;
                    }
                    u.values = t;
                    rn = rtn;
                    r = rt;
                    rm = rtm;
                }
                _ => {
                    shift = if shift == 0.0 { 1.0 / self.cfg.pseudo_time_step } else { shift * 10.0 };
                    if shift > 1e8 {
                        break;
                    }
                }
            }
        }
        if rn <= tolerance {
            return Ok(SolveStats { steps: used, residual: rn, fallback: false });
        }
        Err(Error::NoConvergence { iterations: used, residual: rn })
    }

    /// One level: monotone warm start, then the consistent polish. If the
    /// polish fails the monotone solution is finished and returned instead.
    fn solve_level(&self, u: &mut GridField, f: &GridField, tolerance: f64) -> Result<SolveStats> {
        let budget = self.cfg.max_iterations;
        if self.interpolation != Interpolation::Trigonometric {
            return self.iterate_newton(u, f, tolerance, budget);
        }
        let monotone = self.clone().with_interpolation(Interpolation::Extremal);
        let warm = monotone.iterate_newton(u, f, tolerance.max(WARM_TOLERANCE), budget)?;
        let start = u.clone();
        let left = budget.saturating_sub(warm.steps).max(1);
        match self.iterate_newton(u, f, tolerance, left) {
            Ok(polish) => Ok(SolveStats { steps: warm.steps + polish.steps, ..polish }),
            Err(_) => {
                *u = start;
                let rest = monotone.iterate_newton(u, f, tolerance, left)?;
                Ok(SolveStats { steps: warm.steps + rest.steps, fallback: true, ..rest })
            }
        }
    }
}

/// Diagnostics of a torsion solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveReport {
    /// Newton steps on the finest grid.
    pub iterations: usize,
    /// Newton steps over all levels of the nested iteration.
    pub total_iterations: usize,
    pub levels: usize,
    pub residual: f64,
    /// Nodes where `|grad_h u| <= gamma` at convergence.
    pub degenerate_nodes: Vec<(usize, usize)>,
    /// The consistent scheme failed and the monotone extremal solution was
    /// returned.
    pub monotone_fallback: bool,
}

#[derive(Clone, Copy, Debug)]
struct SolveStats {
    steps: usize,
    residual: f64,
    fallback: bool,
}

/// Upper bound on the number of stencil rays at a node.
const MAX_RAYS: usize = 64;

/// Residual at which the monotone warm start hands over to the polish.
const WARM_TOLERANCE: f64 = 1e-3;

/// Coarsest spacing used by the nested iteration.
fn coarse_spacing(grid: &Grid) -> Vec<f64> {
    let inradius = grid.domain().inradius();
    let mut hs = vec![grid.h()];
    loop {
        let next = hs.last().copied().unwrap_or(grid.h()) * 2.0;
        if next >= inradius / 8.0 {
            break;
        }
        hs.push(next);
    }
    hs.reverse();
    hs
}

/// Positive multiple of the boundary distance, scaled like the ball solution
/// of radius `inradius`.
pub fn distance_guess(grid: &Arc<Grid>, params: &OperatorParams) -> GridField {
    let domain = grid.domain();
    let r = domain.inradius();
    let a1 = params.alpha + 1.0;
    let slope = (a1 * r / params.with_dim(grid.dim()).barrier_denominator()).powf(1.0 / a1);
    GridField::from_fn(grid, |x| slope * domain.boundary_distance(x).max(1e-3 * grid.h()))
}

/// Solves `F_h u = f` on `grid` with zero boundary data.
///
/// Uses nested iteration: coarser grids are solved first and interpolated
/// as the initial guess; the coarsest level starts from [`distance_guess`].
pub fn solve_torsion(grid: &Arc<Grid>, params: &OperatorParams, f: &GridField, cfg: &SchemeConfig) -> Result<(GridField, SolveReport)> {
    check_source(grid, f)?;
    let levels = coarse_spacing(grid);
    let mut guess: Option<GridField> = None;
    let mut total = 0;
    let mut report = SolveReport::default();
    for (i, &h) in levels.iter().enumerate() {
        let finest = i + 1 == levels.len();
        let level_grid = if finest { Arc::clone(grid) } else { Arc::new(Grid::new(grid.domain(), h)?) };
        let level_f = if finest { f.clone() } else { GridField::from_fn(&level_grid, |x| f.sample(x).max(f64::MIN_POSITIVE)) };
        let scheme = Scheme::new(&level_grid, params, cfg)?;
        let mut u = match &guess {
            Some(g) => GridField::from_fn(&level_grid, |x| g.sample(x)),
            None => distance_guess(&level_grid, params),
        };
        let tol = if finest { cfg.tolerance } else { cfg.tolerance.max(1e-4) };
        let stats = scheme.solve_level(&mut u, &level_f, tol)?;
        total += stats.steps;
        if finest {
            report = SolveReport {
                iterations: stats.steps,
                total_iterations: total,
                levels: levels.len(),
                residual: stats.residual,
                degenerate_nodes: scheme.degenerate_nodes(&u),
                monotone_fallback: stats.fallback,
            };
        }
        guess = Some(u);
    }
    Ok((guess.expect("at least one level"), report))
}

/// Continues iterating from a given starting field on a single level.
pub fn solve_from(scheme: &Scheme, start: GridField, f: &GridField) -> Result<(GridField, SolveReport)> {
    check_source(scheme.grid(), f)?;
    let mut u = start;
    let stats = scheme.solve_level(&mut u, f, scheme.cfg.tolerance)?;
    let degenerate_nodes = scheme.degenerate_nodes(&u);
    Ok((u, SolveReport { iterations: stats.steps, total_iterations: stats.steps, levels: 1, residual: stats.residual, degenerate_nodes, monotone_fallback: stats.fallback }))
}

fn check_source(grid: &Arc<Grid>, f: &GridField) -> Result<()> {
    if !Arc::ptr_eq(grid, f.grid()) && f.grid().node_count() != grid.node_count() {
        return Err(Error::DimensionMismatch { expected: grid.node_count(), got: f.grid().node_count() });
    }
    let min = f.inf();
    if !(min > 0.0) {
        return Err(Error::NonPositiveSource(min));
    }
    Ok(())
}

/// Convenience: `F_h u` at one node with a freshly built scheme.
pub fn discrete_f(u: &GridField, params: &OperatorParams, node: usize, cfg: &SchemeConfig) -> Result<f64> {
    Scheme::new(u.grid(), params, cfg)?.discrete_f(u, node)
}

/// Convenience: `max |f - F_h u|` with a freshly built scheme.
pub fn residual_norm(u: &GridField, f: &GridField, params: &OperatorParams, cfg: &SchemeConfig) -> Result<f64> {
    Ok(Scheme::new(u.grid(), params, cfg)?.residual_norm(u, f))
}
