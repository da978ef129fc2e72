//! Principal eigenvalues by inverse power iteration, against the classical
//! Laplacian values, plus a (p, alpha) = (3, 1) disk run.
//!
//! cargo run --release --example eigenvalues

use std::sync::Arc;

use concavity::domain::{ConvexDomain, Grid};
use concavity::eigen::{eigen_residual, solve_eigen, EigenConfig};
use concavity::operator::OperatorParams;
use concavity::solver::SchemeConfig;

fn main() -> concavity::Result<()> {
    let j01: f64 = 2.404825557695773;
    let pi2 = std::f64::consts::PI.powi(2);
    let cases = [
        ("interval", ConvexDomain::interval(-1.0, 1.0)?, OperatorParams::finite(2.0, 0.0, 1)?, Some(pi2 / 8.0)),
        ("disk", ConvexDomain::disk([0.0, 0.0], 1.0)?, OperatorParams::finite(2.0, 0.0, 2)?, Some(j01 * j01 / 2.0)),
        ("square", ConvexDomain::rectangle(0.0, 0.0, 1.0, 1.0)?, OperatorParams::finite(2.0, 0.0, 2)?, Some(pi2)),
        ("disk", ConvexDomain::disk([0.0, 0.0], 1.0)?, OperatorParams::finite(3.0, 1.0, 2)?, None),
    ];
    let cfg = SchemeConfig::default();
    for (name, domain, params, exact) in cases {
        let h = if domain.dim() == 1 { 1.0 / 100.0 } else { 1.0 / 32.0 };
        let grid = Arc::new(Grid::new(&domain, h)?);
        let result = solve_eigen(&grid, &params, &cfg, &EigenConfig::default())?;
        let reference = exact.map_or("-".into(), |e| format!("{e:.5} ({:+.2}%)", 100.0 * (result.lambda / e - 1.0)));
        println!(
            "{name:<8} p = {}, alpha = {}: lambda = {:.5}, exact {reference}, {} steps, residual {:.1e}",
            params.p,
            params.alpha,
            result.lambda,
            result.iterations(),
            eigen_residual(&result, &params, &cfg)?
        );
    }
    Ok(())
}
