//! Concavity certificates for computed fields.
//!
//! A positive field `u` is transformed to `w = -u^((alpha+1)/(alpha+2))`
//! (power kind) or `w = -log u` (log kind). The claimed concavity of `u`'s
//! transform is then the convexity of `w`, measured by the gap between `w`
//! and its convex envelope `w_**`, computed exactly as the lower convex hull
//! of the graph cloud. The contact decomposition at each node tells whether
//! the envelope leans on boundary points.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barriers::hopf_bound;
use crate::domain::{ConvexDomain, Grid, Point, AXES};
use crate::error::{Error, Result};
use crate::hull::{envelope_1d, envelope_2d, Contact};
use crate::operator::OperatorParams;
use crate::solver::{GridField, Scheme, SchemeConfig};

/// Weight above which a boundary point counts as spanning.
pub const SPANNING_WEIGHT: f64 = 1e-6;

/// Default relative defect tolerance.
pub const DEFECT_TOLERANCE: f64 = 5e-3;

/// Which concavity is being certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// `u^((alpha+1)/(alpha+2))` concave.
    Power,
    /// `log u` concave.
    Log,
}

impl TransformKind {
    /// Width of the boundary layer left out of envelopes and checks.
    fn layer(self, h: f64) -> f64 {
        match self {
            TransformKind::Power => 0.0,
            TransformKind::Log => 3.0 * h,
        }
    }
}

/// `w` on the inside nodes; boundary points carry `0` (power) or `+inf`
/// (log).
#[derive(Clone, Debug)]
pub struct TransformedField {
    kind: TransformKind,
    field: GridField,
}

impl TransformedField {
    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    /// Inside values; other nodes hold 0 regardless of kind.
    pub fn field(&self) -> &GridField {
        &self.field
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.field.grid()
    }

    pub fn boundary_value(&self) -> f64 {
        match self.kind {
            TransformKind::Power => 0.0,
            TransformKind::Log => f64::INFINITY,
        }
    }

    /// Value at any node, with the boundary convention applied.
    pub fn get(&self, k: usize) -> f64 {
        if self.grid().class(k).is_inside() {
            self.field.get(k)
        } else {
            self.boundary_value()
        }
    }
}

fn negative_value(u: &GridField, k: usize) -> Error {
    Error::NegativeValue { node: u.grid().coords(k), value: u.get(k) }
}

/// `w = -u^((alpha+1)/(alpha+2))`.
pub fn power_transform(u: &GridField, params: &OperatorParams) -> Result<TransformedField> {
    let e = params.concavity_exponent();
    if let Some(&k) = u.grid().inside_nodes().iter().find(|&&k| !(u.get(k) >= 0.0)) {
        return Err(negative_value(u, k));
    }
    Ok(TransformedField { kind: TransformKind::Power, field: u.map(|v| -v.powf(e)) })
}

/// `w = -log u`; requires `u > 0` at every inside node.
pub fn log_transform(u: &GridField) -> Result<TransformedField> {
    if let Some(&k) = u.grid().inside_nodes().iter().find(|&&k| !(u.get(k) > 0.0)) {
        return Err(negative_value(u, k));
    }
    Ok(TransformedField { kind: TransformKind::Log, field: u.map(|v| -v.ln()) })
}

/// A point of the hull input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HullPoint {
    Node { i: usize, j: usize, x: f64, y: f64 },
    Boundary { x: f64, y: f64 },
}

impl HullPoint {
    pub fn is_boundary(&self) -> bool {
        matches!(self, HullPoint::Boundary { .. })
    }
}

/// Convex combination giving `w_**` at one node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeContact {
    pub node: (usize, usize),
    pub points: Vec<HullPoint>,
    pub weights: Vec<f64>,
}

impl NodeContact {
    /// Total weight carried by boundary points.
    pub fn boundary_weight(&self) -> f64 {
        self.points.iter().zip(&self.weights).filter(|(p, _)| p.is_boundary()).map(|(_, w)| w).sum()
    }

    pub fn spans_boundary(&self) -> bool {
        self.points.iter().zip(&self.weights).any(|(p, &w)| p.is_boundary() && w > SPANNING_WEIGHT)
    }
}

/// `w_**` on the tested nodes with their contact decompositions.
#[derive(Clone, Debug)]
pub struct EnvelopeField {
    pub envelope: GridField,
    /// Tested nodes, in the order of `contacts`.
    pub tested: Vec<usize>,
    pub contacts: Vec<NodeContact>,
}

/// Points where the axis arms of inside nodes meet the boundary.
fn boundary_points(grid: &Grid) -> Vec<Point> {
    let axes = if grid.dim() == 1 { 2 } else { 4 };
    let mut out = Vec::new();
    for &k in grid.inside_nodes() {
        let x = grid.point(k);
        for (arm, dir) in grid.arms(k)[..axes].iter().zip(AXES) {
            if arm.node.is_none() {
                out.push([x[0] + arm.length * dir[0] as f64, x[1] + arm.length * dir[1] as f64]);
            }
        }
    }
    out.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    out.dedup();
    out
}

/// Inside nodes at distance at least `layer` from the boundary.
fn nodes_beyond(grid: &Grid, layer: f64) -> Vec<usize> {
    let domain = grid.domain();
    grid.inside_nodes().iter().copied().filter(|&k| layer <= 0.0 || domain.boundary_distance(grid.point(k)) >= layer).collect()
}

/// Convex envelope of `w` over the inside nodes at distance at least `layer`
/// from the boundary, optionally with the boundary points (power kind only).
pub fn convex_envelope(w: &TransformedField, include_boundary: bool, layer: f64) -> Result<EnvelopeField> {
    if include_boundary && w.kind == TransformKind::Log {
        return Err(Error::InvalidArgument("log-kind boundary values are infinite and cannot enter the hull".into()));
    }
    let grid = w.grid();
    let tested = nodes_beyond(grid, layer);
    let boundary = if include_boundary { boundary_points(grid) } else { Vec::new() };
    let mut points: Vec<Point> = tested.iter().map(|&k| grid.point(k)).collect();
    let mut values: Vec<f64> = tested.iter().map(|&k| w.field.get(k)).collect();
    points.extend(&boundary);
    values.extend(std::iter::repeat_n(w.boundary_value(), boundary.len()));
    let env = if grid.dim() == 1 {
        envelope_1d(&points.iter().map(|p| p[0]).collect::<Vec<_>>(), &values)?
    } else {
        envelope_2d(&points, &values)?
    };
    let hull_point = |i: usize| match tested.get(i) {
        Some(&k) => {
            let (a, b) = grid.coords(k);
            let x = grid.point(k);
            HullPoint::Node { i: a, j: b, x: x[0], y: x[1] }
        }
        None => {
            let x = boundary[i - tested.len()];
            HullPoint::Boundary { x: x[0], y: x[1] }
        }
    };
    let mut envelope = GridField::zeros(grid);
    let mut contacts = Vec::with_capacity(tested.len());
    for (i, &k) in tested.iter().enumerate() {
        envelope.set(k, env.values[i]);
        let Contact { vertices, weights } = &env.contacts[i];
        contacts.push(NodeContact { node: grid.coords(k), points: vertices.iter().map(|&v| hull_point(v)).collect(), weights: weights.clone() });
    }
    Ok(EnvelopeField { envelope, tested, contacts })
}

/// Worst negative chord slack found by midpoint sampling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MidpointResult {
    /// Most negative `g(mid) - (g(x) + g(y))/2`; 0 when no chord dips.
    pub worst_slack: f64,
    pub worst_pair: Option<(Point, Point)>,
    pub pairs: usize,
}

/// Hopf difference quotient at one boundary sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HopfRow {
    pub x: f64,
    pub y: f64,
    pub nx: f64,
    pub ny: f64,
    pub r: f64,
    pub quotient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HopfTable {
    pub rows: Vec<HopfRow>,
    /// `-max quotient`; positive when every quotient is negative.
    pub c: f64,
    /// Analytic upper bound for the quotients, when known.
    pub bound: Option<f64>,
}

impl HopfTable {
    /// `c >= ratio * |bound|` (vacuous without a bound).
    pub fn meets_bound(&self, ratio: f64) -> bool {
        self.c > 0.0 && self.bound.is_none_or(|b| self.c >= ratio * b.abs())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,nx,ny,r,quotient")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{}", r.x, r.y, r.nx, r.ny, r.r, r.quotient)?;
        }
        Ok(())
    }
}

/// Outcome of a concavity certification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcavityReport {
    pub kind: TransformKind,
    /// `max (w - w_**)` over the tested nodes.
    pub max_defect: f64,
    pub defect_location: Option<Point>,
    /// `sup |w|` (power) or the range of `w` (log) over the tested nodes.
    pub scale: f64,
    pub relative_defect: f64,
    pub tested_nodes: usize,
    /// Nodes whose envelope value is a combination of two or more points.
    pub nontrivial_contacts: usize,
    pub boundary_spanning: bool,
    pub spanning_count: usize,
    /// Up to [`MAX_LISTED`] spanning decompositions.
    pub spanning: Vec<NodeContact>,
    pub worst_contact: Option<NodeContact>,
    pub midpoint: Option<MidpointResult>,
    pub hopf: Option<HopfTable>,
    pub transformed_residual: Option<TransformedResidual>,
}

/// Transformed-equation residual on the `3h` sub-layer and past a fixed layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransformedResidual {
    pub near: f64,
    pub layer: f64,
    pub far: f64,
}

/// Longest list of decompositions kept in a report.
pub const MAX_LISTED: usize = 32;

impl ConcavityReport {
    /// Relative defect within `tolerance` and no boundary spanning.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.relative_defect <= tolerance && !self.boundary_spanning
    }
}

/// Transform, envelope and report for one field.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub transformed: TransformedField,
    pub envelope: EnvelopeField,
    pub report: ConcavityReport,
}

impl Analysis {
    /// `x,y,w,w_env,defect` for every tested node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let grid = self.transformed.grid();
        writeln!(out, "x,y,w,w_env,defect")?;
        for &k in &self.envelope.tested {
            let x = grid.point(k);
            let (w, e) = (self.transformed.field.get(k), self.envelope.envelope.get(k));
            writeln!(out, "{},{},{},{},{}", x[0], x[1], w, e, w - e)?;
        }
        Ok(())
    }

    /// `w - w_**` on the tested nodes, 0 elsewhere.
    pub fn defect_field(&self) -> GridField {
        let mut out = GridField::zeros(self.transformed.grid());
        for &k in &self.envelope.tested {
            out.set(k, self.transformed.field.get(k) - self.envelope.envelope.get(k));
        }
        out
    }
}

/// Runs the transform and envelope and summarizes the defect. The power kind
/// includes the boundary points; the log kind uses the nodes at distance at
/// least `3h` from the boundary.
pub fn analyze(u: &GridField, params: &OperatorParams, kind: TransformKind) -> Result<Analysis> {
    let transformed = match kind {
        TransformKind::Power => power_transform(u, params)?,
        TransformKind::Log => log_transform(u)?,
    };
    let layer = kind.layer(u.grid().h());
    let envelope = convex_envelope(&transformed, kind == TransformKind::Power, layer)?;
    let grid = u.grid();
    let mut max_defect = 0.0;
    let mut worst: Option<usize> = None;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &k) in envelope.tested.iter().enumerate() {
        let w = transformed.field.get(k);
        lo = lo.min(w);
        hi = hi.max(w);
        let d = w - envelope.envelope.get(k);
        if d > max_defect {
            max_defect = d;
            worst = Some(i);
        }
    }
    let scale = match kind {
        TransformKind::Power => lo.abs().max(hi.abs()),
        TransformKind::Log => hi - lo,
    };
    let spanning_all: Vec<&NodeContact> = envelope.contacts.iter().filter(|c| c.spans_boundary()).collect();
    let report = ConcavityReport {
        kind,
        max_defect,
        defect_location: worst.map(|i| grid.point(envelope.tested[i])),
        scale,
        relative_defect: if scale > 0.0 { max_defect / scale } else { max_defect },
        tested_nodes: envelope.tested.len(),
        nontrivial_contacts: envelope.contacts.iter().filter(|c| c.points.len() > 1).count(),
        boundary_spanning: !spanning_all.is_empty(),
        spanning_count: spanning_all.len(),
        spanning: spanning_all.iter().take(MAX_LISTED).map(|c| (*c).clone()).collect(),
        worst_contact: worst.map(|i| envelope.contacts[i].clone()),
        midpoint: None,
        hopf: None,
        transformed_residual: None,
    };
    Ok(Analysis { transformed, envelope, report })
}

/// [`analyze`] keeping only the report.
pub fn concavity_defect(u: &GridField, params: &OperatorParams, kind: TransformKind) -> Result<ConcavityReport> {
    Ok(analyze(u, params, kind)?.report)
}

/// Nodes at distance at least `max(layer, 3h)` whose stencil stays inside.
fn sub_layer_nodes(scheme: &Scheme, layer: f64) -> Vec<usize> {
    let grid = scheme.grid();
    nodes_beyond(grid, layer.max(3.0 * grid.h())).into_iter().filter(|&k| scheme.stencil_is_inside(k)).collect()
}

fn gradient_norm(scheme: &Scheme, w: &[f64], k: usize) -> f64 {
    let g = scheme.gradient(w, k);
    g[0].hypot(g[1])
}

/// Largest negative part of
/// `F_h w - (1/w) [ c_Q/(alpha+1) |grad_h w|^(alpha+2) + ((alpha+1)/(alpha+2))^(alpha+1) ]`
/// over nodes at distance at least `3h` from the boundary with `w < 0`.
///
/// Zero means `w` is a discrete supersolution of the equation the power
/// transform of a torsion solution satisfies.
pub fn transformed_residual_torsion(w: &TransformedField, params: &OperatorParams, cfg: &SchemeConfig) -> Result<f64> {
    transformed_residual_torsion_beyond(w, params, cfg, 3.0 * w.grid().h())
}

/// [`transformed_residual_torsion`] over the nodes at distance at least
/// `layer` (and `3h`) from the boundary.
///
/// Near the boundary `w` behaves like a fractional power of the distance, so
/// the consistency error in the `3h` layer does not shrink with `h`; a fixed
/// layer isolates the interior convergence.
pub fn transformed_residual_torsion_beyond(w: &TransformedField, params: &OperatorParams, cfg: &SchemeConfig, layer: f64) -> Result<f64> {
    if w.kind != TransformKind::Power {
        return Err(Error::WrongKind { expected: "power" });
    }
    let scheme = Scheme::new(w.grid(), params, cfg)?;
    let params = scheme.params();
    let a1 = params.alpha + 1.0;
    let source = params.concavity_exponent().powf(a1);
    let values = w.field.values();
    let mut worst: f64 = 0.0;
    for k in sub_layer_nodes(&scheme, layer) {
        let v = values[k];
        if !(v < 0.0) {
            continue;
        }
        let grad = gradient_norm(&scheme, values, k);
        let rhs = (params.c_q() / a1 * grad.powf(params.alpha + 2.0) + source) / v;
        worst = worst.max(rhs - scheme.discrete_f(&w.field, k)?);
    }
    Ok(worst)
}

/// Largest negative part of `F_h w + c_Q |grad_h w|^(alpha+2) + lambda`
/// over nodes at distance at least `3h` from the boundary.
pub fn transformed_residual_eigen(w: &TransformedField, lambda: f64, params: &OperatorParams, cfg: &SchemeConfig) -> Result<f64> {
    transformed_residual_eigen_beyond(w, lambda, params, cfg, 3.0 * w.grid().h())
}

/// [`transformed_residual_eigen`] past a fixed boundary layer. `|grad w|`
/// grows like the inverse distance, so for `alpha > 0` the `3h` value is
/// dominated by the gradient term at the layer edge.
pub fn transformed_residual_eigen_beyond(w: &TransformedField, lambda: f64, params: &OperatorParams, cfg: &SchemeConfig, layer: f64) -> Result<f64> {
    if w.kind != TransformKind::Log {
        return Err(Error::WrongKind { expected: "log" });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("eigenvalue {lambda} must be > 0")));
    }
    let scheme = Scheme::new(w.grid(), params, cfg)?;
    let params = scheme.params();
    let values = w.field.values();
    let mut worst: f64 = 0.0;
    for k in sub_layer_nodes(&scheme, layer) {
        let grad = gradient_norm(&scheme, values, k);
        let r = scheme.discrete_f(&w.field, k)? + params.c_q() * grad.powf(params.alpha + 2.0) + lambda;
        worst = worst.max(-r);
    }
    Ok(worst)
}

fn chord_transform(params: &OperatorParams, kind: TransformKind) -> impl Fn(f64) -> f64 {
    let e = params.concavity_exponent();
    move |v: f64| match kind {
        TransformKind::Power => v.max(0.0).powf(e),
        TransformKind::Log => v.ln(),
    }
}

/// Midpoint concavity of the transform along random node chords whose
/// midpoint is a node. Log kind samples nodes at distance at least `3h`.
pub fn midpoint_concavity(u: &GridField, params: &OperatorParams, kind: TransformKind, pair_count: usize, seed: u64) -> Result<MidpointResult> {
    let grid = u.grid();
    let nodes = nodes_beyond(grid, kind.layer(grid.h()));
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("no nodes to sample".into()));
    }
    let g = chord_transform(params, kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = MidpointResult { worst_slack: 0.0, worst_pair: None, pairs: 0 };
    let mut attempts = 0;
    while out.pairs < pair_count && attempts < 50 * pair_count.max(1) {
        attempts += 1;
        let (a, b) = (nodes[rng.random_range(0..nodes.len())], nodes[rng.random_range(0..nodes.len())]);
        let ((ia, ja), (ib, jb)) = (grid.coords(a), grid.coords(b));
        if a == b || (ia + ib) % 2 == 1 || (ja + jb) % 2 == 1 {
            continue;
        }
        let m = grid.index((ia + ib) / 2, (ja + jb) / 2);
        if !grid.class(m).is_inside() {
            continue;
        }
        out.pairs += 1;
        let slack = g(u.get(m)) - 0.5 * (g(u.get(a)) + g(u.get(b)));
        if slack < out.worst_slack {
            out.worst_slack = slack;
            out.worst_pair = Some((grid.point(a), grid.point(b)));
        }
    }
    Ok(out)
}

/// Midpoint concavity of the transform of a function given in closed form,
/// along chords between uniform random points of `domain`.
pub fn midpoint_concavity_fn(domain: &ConvexDomain, u: impl Fn(Point) -> f64, params: &OperatorParams, kind: TransformKind, pair_count: usize, seed: u64) -> MidpointResult {
    let g = chord_transform(params, kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bounding_box();
    let mut draw = || loop {
        let x = [rng.random_range(lo[0]..=hi[0]), if domain.dim() == 1 { 0.0 } else { rng.random_range(lo[1]..=hi[1]) }];
        if domain.contains(x) {
            return x;
        }
    };
    let mut out = MidpointResult { worst_slack: 0.0, worst_pair: None, pairs: pair_count };
    for _ in 0..pair_count {
        let (x, y) = (draw(), draw());
        let m = [(x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0];
        let slack = g(u(m)) - 0.5 * (g(u(x)) + g(u(y)));
        if slack < out.worst_slack {
            out.worst_slack = slack;
            out.worst_pair = Some((x, y));
        }
    }
    out
}

/// Inward difference quotients `-u(x0 - r nu) / r` at `samples` boundary
/// points of the grid's domain, by bilinear interpolation.
pub fn hopf_quotients(u: &GridField, samples: usize, radii: &[f64]) -> Result<HopfTable> {
    let grid = u.grid();
    let domain = grid.domain();
    let limit = 2.0 * grid.h();
    if let Some(r) = radii.iter().find(|&&r| !(r >= limit * (1.0 - 1e-12))) {
        return Err(Error::InvalidArgument(format!("radius {r} is below the grid resolution 2h = {limit}")));
    }
    let mut rows = Vec::new();
    for (x0, nu) in domain.boundary_samples(samples) {
        for &r in radii {
            let y = [x0[0] - r * nu[0], x0[1] - r * nu[1]];
            rows.push(HopfRow { x: x0[0], y: x0[1], nx: nu[0], ny: nu[1], r, quotient: -u.sample(y) / r });
        }
    }
    let c = -rows.iter().map(|r| r.quotient).fold(f64::NEG_INFINITY, f64::max);
    Ok(HopfTable { rows, c, bound: None })
}

/// Hopf bound with `eps` for the smallest interior ball over the samples.
pub fn hopf_prediction(domain: &ConvexDomain, params: &OperatorParams, samples: usize, eps: f64, inf_f: f64) -> Result<f64> {
    let radius = domain
        .boundary_samples(samples)
        .iter()
        .map(|&(x, nu)| domain.interior_ball_radius(x, nu))
        .fold(f64::INFINITY, f64::min);
    hopf_bound(&params.with_dim(domain.dim()), radius, eps, inf_f, 1.0)
}
