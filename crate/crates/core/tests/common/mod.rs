//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use concavity::domain::{ConvexDomain, Grid};
use concavity::operator::OperatorParams;
use concavity::solver::{solve_torsion, GridField, SchemeConfig};

/// The three `(p, alpha)` pairs used across the checks, in the plane.
pub fn pairs() -> [OperatorParams; 3] {
    [OperatorParams::finite(2.0, 0.0, 2).unwrap(), OperatorParams::finite(3.0, 1.0, 2).unwrap(), OperatorParams::infinity(2.0, 2).unwrap()]
}

pub fn label(params: &OperatorParams) -> String {
    format!("({}, {})", params.p, params.alpha)
}

/// Lower convex envelope at each abscissa: the minimum over all chords
/// between two samples that straddle it.
pub fn brute_1d(xs: &[f64], w: &[f64]) -> Vec<f64> {
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

/// Lower convex envelope on the `n x n` lattice of the unit square (node
/// `i + n j` at `(i, j)/(n-1)`): the minimum over every triangle of lattice
/// nodes containing the node, of the linear interpolant there.
pub fn brute_lattice(n: usize, w: &[f64]) -> Vec<f64> {
    let mut best = w.to_vec();
    let pt = |k: usize| [(k % n) as f64, (k / n) as f64];
    let m = n * n;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                let (pa, pb, pc) = (pt(a), pt(b), pt(c));
                let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
                if det == 0.0 {
                    // Collinear triples contribute their chords.
                    for (&(i, j), &q) in [(a, b), (a, c), (b, c)].iter().zip(&[c, b, a]) {
                        let (pi, pj, pq) = (pt(i), pt(j), pt(q));
                        let len = (pj[0] - pi[0]).hypot(pj[1] - pi[1]);
                        let t = ((pq[0] - pi[0]) * (pj[0] - pi[0]) + (pq[1] - pi[1]) * (pj[1] - pi[1])) / (len * len);
                        if t > 0.0 && t < 1.0 {
                            best[q] = best[q].min((1.0 - t) * w[i] + t * w[j]);
                        }
                    }
                    continue;
                }
                let (x0, x1) = (pa[0].min(pb[0]).min(pc[0]) as usize, pa[0].max(pb[0]).max(pc[0]) as usize);
                let (y0, y1) = (pa[1].min(pb[1]).min(pc[1]) as usize, pa[1].max(pb[1]).max(pc[1]) as usize);
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let p = [x as f64, y as f64];
                        let l1 = ((pb[0] - p[0]) * (pc[1] - p[1]) - (pb[1] - p[1]) * (pc[0] - p[0])) / det;
                        let l2 = ((pc[0] - p[0]) * (pa[1] - p[1]) - (pc[1] - p[1]) * (pa[0] - p[0])) / det;
                        let l3 = 1.0 - l1 - l2;
                        if l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12 {
                            let q = x + n * y;
                            best[q] = best[q].min(l1 * w[a] + l2 * w[b] + l3 * w[c]);
                        }
                    }
                }
            }
        }
    }
    best
}

pub fn lattice(n: usize) -> Vec<[f64; 2]> {
    (0..n * n).map(|k| [(k % n) as f64 / (n - 1) as f64, (k / n) as f64 / (n - 1) as f64]).collect()
}

pub fn unit_disk() -> ConvexDomain {
    ConvexDomain::disk([0.0, 0.0], 1.0).unwrap()
}

pub fn grid(domain: &ConvexDomain, h: f64) -> Arc<Grid> {
    Arc::new(Grid::new(domain, h).unwrap())
}

/// Torsion solve with `f = 1` and default settings.
pub fn torsion(grid: &Arc<Grid>, params: &OperatorParams) -> GridField {
    solve_torsion(grid, params, &GridField::constant(grid, 1.0), &SchemeConfig::default()).unwrap().0
}

/// Disk torsion fields at `h = 1/128` for the three pairs, with solve times.
pub fn fine_disk_solves() -> &'static [(OperatorParams, GridField, f64)] {
    static CACHE: OnceLock<Vec<(OperatorParams, GridField, f64)>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let g = grid(&unit_disk(), 1.0 / 128.0);
        pairs()
            .into_iter()
            .map(|params| {
                let start = std::time::Instant::now();
                let u = torsion(&g, &params);
                (params, u, start.elapsed().as_secs_f64())
            })
            .collect()
    })
}
