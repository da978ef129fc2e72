//! Lower convex hulls of graph clouds `{(x_i, w_i)}` and the convex envelope
//! they define at the input points.
//!
//! In 1D this is a monotone chain; in 2D a randomized incremental 3D hull
//! with a full conflict graph. All orientation decisions use exact
//! predicates, so the combinatorics are exact for the given floats.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust::{orient2d, orient3d, Coord, Coord3D};
use serde::Serialize;

use crate::error::{Error, Result};

/// Convex combination realizing the envelope at one point: indices into the
/// input cloud and weights `mu_i >= 0` summing to 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Contact {
    pub vertices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Contact {
    fn vertex(i: usize) -> Self {
        Contact { vertices: vec![i], weights: vec![1.0] }
    }

    fn from_weights(pairs: &[(usize, f64)]) -> Self {
        let total: f64 = pairs.iter().map(|&(_, w)| w.max(0.0)).sum();
        let (vertices, weights) = pairs.iter().filter(|&&(_, w)| w > 0.0).map(|&(i, w)| (i, w / total)).unzip();
        Contact { vertices, weights }
    }

    /// Number of points in the combination.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Envelope values and contact decompositions at every input point.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub values: Vec<f64>,
    pub contacts: Vec<Contact>,
}

fn check_values(n: usize, values: &[f64]) -> Result<()> {
    if n != values.len() {
        return Err(Error::DimensionMismatch { expected: n, got: values.len() });
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite value {v} in hull input")));
    }
    Ok(())
}

fn c2(x: f64, y: f64) -> Coord<f64> {
    Coord { x, y }
}

/// Convex envelope of `values` over the abscissae `xs`.
pub fn envelope_1d(xs: &[f64], values: &[f64]) -> Result<Envelope> {
    check_values(xs.len(), values)?;
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite abscissa in hull input".into()));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(values[a].total_cmp(&values[b])));
    order.dedup_by(|b, a| xs[*a] == xs[*b]);
    if order.len() < 2 {
        return Err(Error::DegenerateCloud("fewer than two distinct abscissae".into()));
    }
    let pt = |i: usize| c2(xs[i], values[i]);
    let mut chain: Vec<usize> = Vec::new();
    for &i in &order {
        while chain.len() >= 2 && orient2d(pt(chain[chain.len() - 2]), pt(chain[chain.len() - 1]), pt(i)) <= 0.0 {
            chain.pop();
        }
        chain.push(i);
    }
    let mut out = Envelope { values: Vec::with_capacity(xs.len()), contacts: Vec::with_capacity(xs.len()) };
    for (i, &x) in xs.iter().enumerate() {
        // First chain vertex at or right of x.
        let k = chain.partition_point(|&c| xs[c] < x);
        let (value, contact) = if xs[chain[k]] == x {
            let c = chain[k];
            (values[c], Contact::vertex(c))
        } else {
            let (a, b) = (chain[k - 1], chain[k]);
            let t = (x - xs[a]) / (xs[b] - xs[a]);
            ((1.0 - t) * values[a] + t * values[b], Contact::from_weights(&[(a, 1.0 - t), (b, t)]))
        };
        out.values.push(value.min(values[i]));
        out.contacts.push(contact);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
struct Face {
    /// Counterclockwise seen from outside.
    v: [usize; 3],
    /// Face across edge `(v[e], v[e+1])`.
    nbr: [usize; 3],
    alive: bool,
    /// Uninserted points that see this face.
    conflicts: Vec<usize>,
}

struct Hull<'a> {
    pts: &'a [[f64; 3]],
    faces: Vec<Face>,
    /// Faces each uninserted point sees (may hold dead faces).
    sees: Vec<Vec<usize>>,
    inserted: Vec<bool>,
}

fn c3(p: [f64; 3]) -> Coord3D<f64> {
    Coord3D { x: p[0], y: p[1], z: p[2] }
}

fn collinear(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> bool {
    [(0, 1), (1, 2), (0, 2)].iter().all(|&(i, j)| orient2d(c2(a[i], a[j]), c2(b[i], b[j]), c2(c[i], c[j])) == 0.0)
}

impl<'a> Hull<'a> {
    fn orient(&self, f: &[usize; 3], q: usize) -> f64 {
        let p = self.pts;
        orient3d(c3(p[f[0]]), c3(p[f[1]]), c3(p[f[2]]), c3(p[q]))
    }

    fn sees(&self, f: usize, q: usize) -> bool {
        self.orient(&self.faces[f].v, q) < 0.0
    }

    /// Builds the hull, inserting points in `order`. `None` when the cloud
    /// is coplanar.
    fn build(pts: &'a [[f64; 3]], order: &[usize]) -> Option<Hull<'a>> {
        let first = order[0];
        let second = *order.iter().find(|&&i| pts[i] != pts[first])?;
        let third = *order.iter().find(|&&i| !collinear(pts[first], pts[second], pts[i]))?;
        let fourth = *order.iter().find(|&&i| orient3d(c3(pts[first]), c3(pts[second]), c3(pts[third]), c3(pts[i])) != 0.0)?;
        let mut hull = Hull { pts, faces: Vec::new(), sees: vec![Vec::new(); pts.len()], inserted: vec![false; pts.len()] };
        let tet = [first, second, third, fourth];
        let mut edges = HashMap::new();
        for skip in 0..4 {
            let mut v: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| tet[i]).collect();
            if hull.orient(&[v[0], v[1], v[2]], tet[skip]) < 0.0 {
                v.swap(1, 2);
            }
            let v = [v[0], v[1], v[2]];
            let id = hull.faces.len();
            for e in 0..3 {
                edges.insert((v[e], v[(e + 1) % 3]), id);
            }
            hull.faces.push(Face { v, nbr: [usize::MAX; 3], alive: true, conflicts: Vec::new() });
        }
        for f in 0..4 {
            let v = hull.faces[f].v;
            for e in 0..3 {
                hull.faces[f].nbr[e] = edges[&(v[(e + 1) % 3], v[e])];
            }
        }
        for &i in &tet {
            hull.inserted[i] = true;
        }
        for &q in order {
            if hull.inserted[q] {
                continue;
            }
            for f in 0..4 {
                if hull.sees(f, q) {
                    hull.faces[f].conflicts.push(q);
                    hull.sees[q].push(f);
                }
            }
        }
        let mut visible = vec![usize::MAX; 0];
        let mut seen = vec![usize::MAX; pts.len()];
        for &q in order {
            if hull.inserted[q] {
                continue;
            }
            hull.inserted[q] = true;
            let lit: Vec<usize> = std::mem::take(&mut hull.sees[q]).into_iter().filter(|&f| hull.faces[f].alive).collect();
            if lit.is_empty() {
                continue;
            }
            visible.resize(hull.faces.len(), usize::MAX);
            for &f in &lit {
                visible[f] = q;
            }
            let mut starts = HashMap::new();
            let mut ends = HashMap::new();
            let mut created = Vec::new();
            for &f in &lit {
                for e in 0..3 {
                    let g = hull.faces[f].nbr[e];
                    if visible[g] == q {
                        continue;
                    }
                    let (a, b) = (hull.faces[f].v[e], hull.faces[f].v[(e + 1) % 3]);
                    let id = hull.faces.len();
                    let ge = (0..3).find(|&k| hull.faces[g].v[k] == b && hull.faces[g].v[(k + 1) % 3] == a).expect("hull adjacency is symmetric");
                    hull.faces[g].nbr[ge] = id;
                    let mut conflicts = Vec::new();
                    let v = [a, b, q];
                    for &r in hull.faces[f].conflicts.iter().chain(&hull.faces[g].conflicts) {
                        if hull.inserted[r] || seen[r] == id {
                            continue;
                        }
                        seen[r] = id;
                        if hull.orient(&v, r) < 0.0 {
                            conflicts.push(r);
                            hull.sees[r].push(id);
                        }
                    }
                    hull.faces.push(Face { v, nbr: [g, usize::MAX, usize::MAX], alive: true, conflicts });
                    starts.insert(a, id);
                    ends.insert(b, id);
                    created.push(id);
                }
            }
            for &id in &created {
                let [a, b, _] = hull.faces[id].v;
                hull.faces[id].nbr[1] = starts[&b];
                hull.faces[id].nbr[2] = ends[&a];
            }
            for &f in &lit {
                hull.faces[f].alive = false;
                hull.faces[f].conflicts = Vec::new();
            }
        }
        Some(hull)
    }

    /// Live faces whose outward normal points down.
    fn lower_faces(&self) -> Vec<[usize; 3]> {
        let p = self.pts;
        self.faces
            .iter()
            .filter(|f| f.alive)
            .map(|f| f.v)
            .filter(|v| orient2d(c2(p[v[0]][0], p[v[0]][1]), c2(p[v[1]][0], p[v[1]][1]), c2(p[v[2]][0], p[v[2]][1])) < 0.0)
            .collect()
    }
}

/// Convex envelope of `values` over planar `points`.
pub fn envelope_2d(points: &[[f64; 2]], values: &[f64]) -> Result<Envelope> {
    check_values(points.len(), values)?;
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite point in hull input".into()));
    }
    let n = points.len();
    let planar_degenerate = || {
        let a = points[0];
        let b = points.iter().find(|&&p| p != a);
        match b {
            None => true,
            Some(&b) => points.iter().all(|&c| orient2d(c2(a[0], a[1]), c2(b[0], b[1]), c2(c[0], c[1])) == 0.0),
        }
    };
    if n < 3 || planar_degenerate() {
        return Err(Error::DegenerateCloud("points are collinear in the plane".into()));
    }
    let pts: Vec<[f64; 3]> = points.iter().zip(values).map(|(p, &w)| [p[0], p[1], w]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let Some(hull) = Hull::build(&pts, &order) else {
        // The graph is a plane: the field is affine and its own envelope.
        return Ok(Envelope { values: values.to_vec(), contacts: (0..n).map(Contact::vertex).collect() });
    };
    let lower = hull.lower_faces();
    let mut on_lower = vec![false; n];
    for f in &lower {
        for &i in f {
            on_lower[i] = true;
        }
    }
    let mut out = Envelope { values: values.to_vec(), contacts: (0..n).map(Contact::vertex).collect() };
    let pending: Vec<usize> = (0..n).filter(|&i| !on_lower[i]).collect();
    if pending.is_empty() {
        return Ok(out);
    }
    let buckets = Buckets::new(points, &pending);
    let mut done = vec![false; n];
    for f in &lower {
        let [a, b, c] = f.map(|i| c2(points[i][0], points[i][1]));
        let det = orient2d(a, b, c);
        let lo = [f.iter().map(|&i| points[i][0]).fold(f64::INFINITY, f64::min), f.iter().map(|&i| points[i][1]).fold(f64::INFINITY, f64::min)];
        let hi = [f.iter().map(|&i| points[i][0]).fold(f64::NEG_INFINITY, f64::max), f.iter().map(|&i| points[i][1]).fold(f64::NEG_INFINITY, f64::max)];
        buckets.visit(lo, hi, |i| {
            if done[i] {
                return;
            }
            let p = c2(points[i][0], points[i][1]);
            let (la, lb, lc) = (orient2d(p, b, c), orient2d(a, p, c), orient2d(a, b, p));
            // The face is clockwise in the plane, so inside means all <= 0.
            if la > 0.0 || lb > 0.0 || lc > 0.0 {
                return;
            }
            done[i] = true;
            let contact = Contact::from_weights(&[(f[0], la / det), (f[1], lb / det), (f[2], lc / det)]);
            let value: f64 = contact.vertices.iter().zip(&contact.weights).map(|(&v, &w)| w * values[v]).sum();
            out.values[i] = value.min(values[i]);
            out.contacts[i] = contact;
        });
    }
    if let Some(i) = pending.iter().find(|&&i| !done[i]) {
        return Err(Error::DegenerateCloud(format!("point {i} not covered by the lower hull")));
    }
    Ok(out)
}

/// Uniform bucket grid over a subset of planar points.
struct Buckets {
    lo: [f64; 2],
    cell: f64,
    shape: [usize; 2],
    cells: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(points: &[[f64; 2]], members: &[usize]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let per_side = (members.len() as f64).sqrt().ceil().max(1.0);
        let cell = span / per_side;
        let shape = [0, 1].map(|d| (((hi[d] - lo[d]) / cell).floor() as usize + 1).max(1));
        let mut cells = vec![Vec::new(); shape[0] * shape[1]];
        let mut out = Buckets { lo, cell, shape, cells: Vec::new() };
        for &i in members {
            let [cx, cy] = out.cell_of(points[i]);
            cells[cy * shape[0] + cx].push(i);
        }
        out.cells = cells;
        out
    }

    fn cell_of(&self, p: [f64; 2]) -> [usize; 2] {
        [0, 1].map(|d| (((p[d] - self.lo[d]) / self.cell).floor().max(0.0) as usize).min(self.shape[d] - 1))
    }

    fn visit(&self, lo: [f64; 2], hi: [f64; 2], mut f: impl FnMut(usize)) {
        let a = self.cell_of(lo);
        let b = self.cell_of(hi);
        for cy in a[1]..=b[1] {
            for cx in a[0]..=b[0] {
                for &i in &self.cells[cy * self.shape[0] + cx] {
                    f(i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute_1d(xs: &[f64], w: &[f64]) -> Vec<f64> {
        xs.iter()
            .enumerate()
            .map(|(k, &x)| {
                let mut best = w[k];
                for i in 0..xs.len() {
                    for j in 0..xs.len() {
                        if xs[i] < x && x < xs[j] {
                            let t = (x - xs[i]) / (xs[j] - xs[i]);
                            best = best.min((1.0 - t) * w[i] + t * w[j]);
                        }
                    }
                }
                best
            })
            .collect()
    }

    fn lattice(n: usize) -> Vec<[f64; 2]> {
        (0..n * n).map(|k| [(k % n) as f64 / (n - 1) as f64, (k / n) as f64 / (n - 1) as f64]).collect()
    }

    fn brute_2d(pts: &[[f64; 2]], w: &[f64]) -> Vec<f64> {
        let mut best = w.to_vec();
        let n = pts.len();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (a, b, c) = (pts[i], pts[j], pts[k]);
                    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                    if det.abs() < 1e-14 {
                        continue;
                    }
                    for (q, p) in pts.iter().enumerate() {
                        let l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (b[1] - p[1]) * (c[0] - p[0])) / det;
                        let l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (c[1] - p[1]) * (a[0] - p[0])) / det;
                        let l3 = 1.0 - l1 - l2;
                        if l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12 {
                            best[q] = best[q].min(l1 * w[i] + l2 * w[j] + l3 * w[k]);
                        }
                    }
                }
            }
        }
        best
    }

    fn check_contacts(env: &Envelope, w: &[f64], max_len: usize) {
        for (i, c) in env.contacts.iter().enumerate() {
            assert!(!c.is_empty() && c.len() <= max_len);
            assert!(c.weights.iter().all(|&m| m >= 0.0));
            assert!((c.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(env.values[i] <= w[i]);
        }
    }

    #[test]
    fn convex_1d_is_its_own_envelope() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let w: Vec<f64> = xs.iter().map(|x| (x - 0.3) * (x - 0.3)).collect();
        let env = envelope_1d(&xs, &w).unwrap();
        assert_eq!(env.values, w);
        assert!(env.contacts.iter().enumerate().all(|(i, c)| c.vertices == vec![i]));
    }

    #[test]
    fn bump_is_bridged_in_1d() {
        let xs: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
        let w: Vec<f64> = xs.iter().map(|x| x * x + if (x - 0.5).abs() < 0.12 { 0.1 } else { 0.0 }).collect();
        let env = envelope_1d(&xs, &w).unwrap();
        assert!(env.values[10] < w[10] - 0.05);
        assert_eq!(env.contacts[10].len(), 2);
        check_contacts(&env, &w, 2);
    }

    #[test]
    fn random_1d_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.random_range(2..120);
            let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            xs.shuffle(&mut rng);
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let env = envelope_1d(&xs, &w).unwrap();
            let brute = brute_1d(&xs, &w);
            for (a, b) in env.values.iter().zip(&brute) {
                assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
            check_contacts(&env, &w, 2);
        }
    }

    #[test]
    fn random_2d_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [3, 4, 6, 9] {
            let pts = lattice(n);
            let w: Vec<f64> = (0..pts.len()).map(|_| rng.random::<f64>()).collect();
            let env = envelope_2d(&pts, &w).unwrap();
            let brute = brute_2d(&pts, &w);
            for (a, b) in env.values.iter().zip(&brute) {
                assert!((a - b).abs() <= 1e-9, "{n}: {a} vs {b}");
            }
            check_contacts(&env, &w, 3);
        }
    }

    #[test]
    fn cocircular_paraboloid_is_exact() {
        // |x|^2 on a lattice has many coplanar quadruples.
        let pts = lattice(15);
        let w: Vec<f64> = pts.iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect();
        let env = envelope_2d(&pts, &w).unwrap();
        for (a, b) in env.values.iter().zip(&w) {
            assert!((a - b).abs() <= 1e-12);
        }
        check_contacts(&env, &w, 3);
    }

    #[test]
    fn affine_and_degenerate_clouds() {
        let pts = lattice(5);
        let w: Vec<f64> = pts.iter().map(|p| 2.0 * p[0] - p[1] + 0.5).collect();
        let env = envelope_2d(&pts, &w).unwrap();
        assert_eq!(env.values, w);
        let line: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(envelope_2d(&line, &[0.0; 5]), Err(Error::DegenerateCloud(_))));
        assert!(matches!(envelope_1d(&[1.0, 1.0], &[0.0, 1.0]), Err(Error::DegenerateCloud(_))));
        assert!(envelope_2d(&pts, &[0.0; 3]).is_err());
    }

    #[test]
    fn envelope_is_idempotent_on_larger_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts: Vec<[f64; 2]> = (0..3000).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let w: Vec<f64> = pts.iter().map(|p| (6.0 * p[0]).sin() + (5.0 * p[1]).cos()).collect();
        let env = envelope_2d(&pts, &w).unwrap();
        check_contacts(&env, &w, 3);
        let again = envelope_2d(&pts, &env.values).unwrap();
        for (a, b) in again.values.iter().zip(&env.values) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }
}
