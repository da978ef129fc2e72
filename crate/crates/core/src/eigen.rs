//! Principal eigenpair of `F(grad u, D^2 u) = lambda |u|^alpha u`, `u = 0` on
//! the boundary, by nonlinear inverse power iteration.
//!
//! Each step solves `F(v) = u_k^(alpha+1)` and renormalizes
//! `u_{k+1} = v / sup v`, `lambda_{k+1} = (sup v)^-(alpha+1)`. Since `F` is
//! homogeneous of degree `alpha + 1` in `u`, a fixed point is an eigenpair.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::operator::OperatorParams;
use crate::solver::{distance_guess, solve_from, GridField, Scheme, SchemeConfig};

/// Outer iteration settings; the inner solves use a [`SchemeConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    /// Stop when `|lambda_{k+1} - lambda_k| <= tolerance * lambda_k`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { tolerance: 1e-8, max_iterations: 200 }
    }
}

impl EigenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("eigen tolerance {} must be > 0", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("eigen max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// One outer step: the eigenvalue estimate and the inner solve residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub lambda: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda: f64,
    /// Positive inside, `sup = 1`.
    pub eigenfield: GridField,
    pub trace: Vec<TraceEntry>,
    /// Whether `lambda_k` was monotone from the fourth step on.
    pub monotone_tail: bool,
    /// Some inner solve returned the monotone fallback solution.
    pub monotone_fallback: bool,
}

/// JSON summary of an [`EigenResult`].
#[derive(Clone, Debug, Serialize)]
pub struct EigenSummary {
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
    pub monotone_tail: bool,
    pub monotone_fallback: bool,
    pub trace: Vec<TraceEntry>,
}

impl EigenResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// Summary with the eigen residual on the interior sub-layer.
    pub fn summary(&self, params: &OperatorParams, cfg: &SchemeConfig) -> Result<EigenSummary> {
        Ok(EigenSummary {
            lambda: self.lambda,
            iterations: self.iterations(),
            residual: eigen_residual(self, params, cfg)?,
            monotone_tail: self.monotone_tail,
            monotone_fallback: self.monotone_fallback,
            trace: self.trace.clone(),
        })
    }

    /// `iteration,lambda,residual` per outer step.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,lambda,residual")?;
        for (i, t) in self.trace.iter().enumerate() {
            writeln!(out, "{},{},{}", i + 1, t.lambda, t.residual)?;
        }
        Ok(())
    }
}

fn source(u: &GridField, alpha: f64) -> GridField {
    u.map(|x| x.max(f64::MIN_POSITIVE).powf(alpha + 1.0))
}

/// Inverse power iteration from the normalized boundary-distance function.
pub fn solve_eigen(grid: &Arc<Grid>, params: &OperatorParams, cfg: &SchemeConfig, eig: &EigenConfig) -> Result<EigenResult> {
    let start = distance_guess(grid, params);
    let start = start.map(|x| x / start.sup());
    solve_eigen_from(grid, params, cfg, eig, start)
}

/// Inverse power iteration from a positive starting field of any scale.
pub fn solve_eigen_from(grid: &Arc<Grid>, params: &OperatorParams, cfg: &SchemeConfig, eig: &EigenConfig, start: GridField) -> Result<EigenResult> {
    eig.validate()?;
    let scheme = Scheme::new(grid, params, cfg)?;
    let alpha = params.alpha;
    if !(start.inf() > 0.0) {
        return Err(Error::InvalidArgument(format!("starting field must be positive inside (min {})", start.inf())));
    }
    let mut u = start.map(|x| x / start.sup());
    let mut lambda = f64::NAN;
    let mut trace = Vec::new();
    let mut fallback = false;
    let mut change = f64::INFINITY;
    for _ in 0..eig.max_iterations {
        let f = source(&u, alpha);
        // v is close to u * lambda^(-1/(alpha+1)) once the iteration settles.
        let scale = if lambda.is_finite() { lambda.powf(-1.0 / (alpha + 1.0)) } else { 1.0 };
        let (v, report) = solve_from(&scheme, u.map(|x| x * scale), &f)?;
        fallback |= report.monotone_fallback;
        let top = v.sup();
        if !(top > 0.0) {
            return Err(Error::InvalidArgument("inner solve returned a nonpositive field".into()));
        }
        let next = top.powf(-(alpha + 1.0));
        u = v.map(|x| x / top);
        trace.push(TraceEntry { lambda: next, residual: report.residual });
        change = (next - lambda).abs();
        let done = change <= eig.tolerance * next;
        lambda = next;
        if done {
            let monotone_tail = monotone_after(&trace, 3);
            return Ok(EigenResult { lambda, eigenfield: u, trace, monotone_tail, monotone_fallback: fallback });
        }
    }
    Err(Error::EigenNoConvergence { iterations: eig.max_iterations, change })
}

fn monotone_after(trace: &[TraceEntry], skip: usize) -> bool {
    let tail: Vec<f64> = trace.iter().skip(skip).map(|t| t.lambda).collect();
    tail.windows(2).all(|w| w[1] <= w[0]) || tail.windows(2).all(|w| w[1] >= w[0])
}

/// `max |F_h u - lambda |u|^alpha u|` over inside nodes at distance at
/// least `3h` from the boundary.
pub fn eigen_residual(result: &EigenResult, params: &OperatorParams, cfg: &SchemeConfig) -> Result<f64> {
    pair_residual(&result.eigenfield, result.lambda, params, cfg)
}

/// [`eigen_residual`] for an arbitrary pair `(u, lambda)`.
pub fn pair_residual(u: &GridField, lambda: f64, params: &OperatorParams, cfg: &SchemeConfig) -> Result<f64> {
    let grid = u.grid();
    let scheme = Scheme::new(grid, params, cfg)?;
    let layer = 3.0 * grid.h();
    let mut worst: f64 = 0.0;
    for &k in grid.inside_nodes() {
        if grid.domain().boundary_distance(grid.point(k)) < layer {
            continue;
        }
        let v = u.get(k);
        let r = scheme.discrete_f(u, k)? - lambda * v.abs().powf(params.alpha) * v;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConvexDomain;

    fn laplacian() -> OperatorParams {
        OperatorParams::finite(2.0, 0.0, 2).unwrap()
    }

    fn grid(domain: ConvexDomain, h: f64) -> Arc<Grid> {
        Arc::new(Grid::new(&domain, h).unwrap())
    }

    // First zero of the Bessel function J_0.
    const J01: f64 = 2.404825557695773;

    #[test]
    fn disk_eigenvalue() {
        let g = grid(ConvexDomain::disk([0.0, 0.0], 1.0).unwrap(), 1.0 / 32.0);
        let cfg = SchemeConfig::default();
        let r = solve_eigen(&g, &laplacian(), &cfg, &EigenConfig::default()).unwrap();
        let exact = J01 * J01 / 2.0;
        assert!((r.lambda - exact).abs() <= 0.02 * exact, "{}", r.lambda);
        assert!((r.eigenfield.sup() - 1.0).abs() < 1e-15);
        assert!(r.eigenfield.inf() > 0.0);
        assert!(eigen_residual(&r, &laplacian(), &cfg).unwrap() <= 10.0 * cfg.tolerance);
    }

    #[test]
    fn interval_eigenvalue() {
        let g = grid(ConvexDomain::interval(-1.0, 1.0).unwrap(), 1.0 / 100.0);
        let params = OperatorParams::finite(2.0, 0.0, 1).unwrap();
        let r = solve_eigen(&g, &params, &SchemeConfig::default(), &EigenConfig::default()).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 8.0;
        assert!((r.lambda - exact).abs() <= 0.01 * exact, "{}", r.lambda);
        // sin-mode: cos(pi x / 2).
        let err = g.inside_nodes().iter().map(|&k| (r.eigenfield.get(k) - (std::f64::consts::FRAC_PI_2 * g.point(k)[0]).cos()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn start_scale_does_not_matter() {
        let g = grid(ConvexDomain::disk([0.0, 0.0], 1.0).unwrap(), 1.0 / 16.0);
        let params = OperatorParams::finite(3.0, 1.0, 2).unwrap();
        let cfg = SchemeConfig::default();
        let eig = EigenConfig::default();
        let base = distance_guess(&g, &params);
        let a = solve_eigen_from(&g, &params, &cfg, &eig, base.clone()).unwrap();
        let b = solve_eigen_from(&g, &params, &cfg, &eig, base.map(|x| 37.0 * x)).unwrap();
        assert!((a.lambda - b.lambda).abs() <= 1e-6 * a.lambda);
        let diff = g.inside_nodes().iter().map(|&k| (a.eigenfield.get(k) - b.eigenfield.get(k)).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn scaled_pair_residual_is_homogeneous() {
        let g = grid(ConvexDomain::disk([0.0, 0.0], 1.0).unwrap(), 1.0 / 16.0);
        let params = OperatorParams::finite(3.0, 1.0, 2).unwrap();
        let cfg = SchemeConfig::default();
        let u = GridField::from_fn(&g, |x| (1.0 - x[0] * x[0] - x[1] * x[1]).powf(1.3));
        let base = pair_residual(&u, 4.0, &params, &cfg).unwrap();
        let s: f64 = 2.5;
        let scaled = pair_residual(&u.map(|x| s * x), 4.0, &params, &cfg).unwrap();
        assert!((scaled - s.powi(2) * base).abs() <= 1e-9 * scaled.max(1.0), "{scaled} vs {}", s.powi(2) * base);
    }

    #[test]
    fn eigenvalue_scales_with_radius() {
        let params = OperatorParams::finite(3.0, 1.0, 2).unwrap();
        let cfg = SchemeConfig::default();
        let eig = EigenConfig::default();
        let big = solve_eigen(&grid(ConvexDomain::disk([0.0, 0.0], 1.0).unwrap(), 1.0 / 16.0), &params, &cfg, &eig).unwrap();
        let small = solve_eigen(&grid(ConvexDomain::disk([0.0, 0.0], 0.5).unwrap(), 1.0 / 32.0), &params, &cfg, &eig).unwrap();
        // Same lattice relative to the radius, so the discrete spectra scale exactly.
        let ratio = small.lambda / big.lambda;
        assert!((ratio - 2f64.powi(3)).abs() <= 1e-6 * ratio, "{ratio}");
        assert!(big.lambda < small.lambda);
    }

    #[test]
    fn config_is_validated() {
        assert!(EigenConfig { tolerance: 0.0, ..Default::default() }.validate().is_err());
        assert!(EigenConfig { max_iterations: 0, ..Default::default() }.validate().is_err());
    }
}
