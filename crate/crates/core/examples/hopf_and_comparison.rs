//! Boundary behaviour of a torsion solve: inward difference quotients against
//! the Hopf bound, and comparison with the radial barrier on the disk.
//!
//! cargo run --release --example hopf_and_comparison

use std::sync::Arc;

use concavity::barriers::{ball_spec, comparison_check, comparison_tolerance};
use concavity::certify::{hopf_prediction, hopf_quotients};
use concavity::domain::{ConvexDomain, Grid};
use concavity::operator::OperatorParams;
use concavity::solver::{solve_torsion, GridField, SchemeConfig};

fn main() -> concavity::Result<()> {
    let disk = ConvexDomain::disk([0.0, 0.0], 1.0)?;
    let h = 1.0 / 64.0;
    let grid = Arc::new(Grid::new(&disk, h)?);
    for params in [OperatorParams::finite(2.0, 0.0, 2)?, OperatorParams::finite(3.0, 1.0, 2)?, OperatorParams::infinity(2.0, 2)?] {
        let (u, _) = solve_torsion(&grid, &params, &GridField::constant(&grid, 1.0), &SchemeConfig::default())?;
        let table = hopf_quotients(&u, 16, &[4.0 * h, 8.0 * h, 16.0 * h])?;
        let bound = hopf_prediction(&disk, &params, 16, 0.5, 1.0)?;
        let spec = ball_spec(&params, 1.0)?;
        let tol = comparison_tolerance(&u, false);
        let violations = comparison_check(&u, &spec, grid.inside_nodes(), tol)?;
        println!(
            "p = {:<3} alpha = {}: Hopf c = {:.4} vs bound {:.4} (ratio {:.2}); comparison violations beyond {tol:.1e}: {}",
            params.p.to_string(),
            params.alpha,
            table.c,
            bound,
            table.c / bound.abs(),
            violations.len()
        );
    }
    Ok(())
}
