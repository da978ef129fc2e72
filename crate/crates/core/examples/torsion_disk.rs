//! Torsion problem F(Du, D^2u) = 1 on the unit disk against the exact radial
//! solution, under grid refinement.
//!
//! cargo run --release --example torsion_disk

use std::sync::Arc;

use concavity::barriers::exact_ball_torsion;
use concavity::domain::{ConvexDomain, Grid};
use concavity::operator::OperatorParams;
use concavity::solver::{solve_torsion, GridField, SchemeConfig};

fn main() -> concavity::Result<()> {
    let disk = ConvexDomain::disk([0.0, 0.0], 1.0)?;
    for params in [OperatorParams::finite(2.0, 0.0, 2)?, OperatorParams::finite(3.0, 1.0, 2)?, OperatorParams::infinity(2.0, 2)?] {
        println!("p = {}, alpha = {}: exact u(0) = {:.6}", params.p, params.alpha, exact_ball_torsion(&params, 1.0, &[0.0, 0.0])?);
        for n in [16.0, 32.0, 64.0] {
            let grid = Arc::new(Grid::new(&disk, 1.0 / n)?);
            let (u, report) = solve_torsion(&grid, &params, &GridField::constant(&grid, 1.0), &SchemeConfig::default())?;
            let err = grid
                .inside_nodes()
                .iter()
                .map(|&k| (u.get(k) - exact_ball_torsion(&params, 1.0, &grid.point(k)).unwrap()).abs())
                .fold(0.0, f64::max);
            println!("  h = 1/{n}: sup u = {:.6}, sup error = {err:.2e}, Newton steps = {}", u.sup(), report.total_iterations);
        }
    }
    Ok(())
}
