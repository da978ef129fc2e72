//! Log concavity of principal eigenfunctions, with the transformed-equation
//! residual and the Hopf constant.
//!
//! cargo run --release --example log_concavity

use std::sync::Arc;

use concavity::certify::{analyze, hopf_quotients, log_transform, transformed_residual_eigen_beyond, TransformKind};
use concavity::domain::{ConvexDomain, Grid};
use concavity::eigen::{solve_eigen, EigenConfig};
use concavity::operator::OperatorParams;
use concavity::solver::SchemeConfig;

fn main() -> concavity::Result<()> {
    let cfg = SchemeConfig::default();
    for (name, domain) in [("disk", ConvexDomain::disk([0.0, 0.0], 1.0)?), ("square", ConvexDomain::rectangle(0.0, 0.0, 1.0, 1.0)?)] {
        let h = 1.0 / 32.0;
        let grid = Arc::new(Grid::new(&domain, h)?);
        for params in [OperatorParams::finite(2.0, 0.0, 2)?, OperatorParams::finite(3.0, 1.0, 2)?] {
            let eig = solve_eigen(&grid, &params, &cfg, &EigenConfig::default())?;
            let report = analyze(&eig.eigenfield, &params, TransformKind::Log)?.report;
            let w = log_transform(&eig.eigenfield)?;
            let residual = transformed_residual_eigen_beyond(&w, eig.lambda, &params, &cfg, 0.15)?;
            let hopf = hopf_quotients(&eig.eigenfield, 16, &[4.0 * h, 8.0 * h])?;
            println!(
                "{name:<6} p = {}, alpha = {}: lambda {:.4}, log defect {:.1e} over {} nodes, transformed residual {residual:.1e}, Hopf c {:.3}",
                params.p, params.alpha, eig.lambda, report.relative_defect, report.tested_nodes, hopf.c
            );
        }
    }
    Ok(())
}
