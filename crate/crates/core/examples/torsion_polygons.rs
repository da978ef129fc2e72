//! Torsion on polygons, where p = inf may need the monotone fallback; the
//! square solution is bracketed by the inscribed and circumscribed disks.
//!
//! cargo run --release --example torsion_polygons

use std::sync::Arc;

use concavity::barriers::exact_ball_torsion;
use concavity::domain::{ConvexDomain, Grid};
use concavity::operator::OperatorParams;
use concavity::solver::{solve_torsion, GridField, Interpolation, SchemeConfig};

fn main() -> concavity::Result<()> {
    let square = ConvexDomain::rectangle(0.0, 0.0, 1.0, 1.0)?;
    let quad = ConvexDomain::polygon(vec![[0.0, 0.0], [1.2, 0.1], [1.0, 0.9], [0.15, 0.7]])?;
    for (name, domain) in [("square", square), ("quadrilateral", quad)] {
        let grid = Arc::new(Grid::new(&domain, 1.0 / 48.0)?);
        for params in [OperatorParams::finite(3.0, 1.0, 2)?, OperatorParams::infinity(2.0, 2)?] {
            for interpolation in [Interpolation::Extremal, Interpolation::Trigonometric] {
                let cfg = SchemeConfig { interpolation, ..SchemeConfig::default() };
                let (u, report) = solve_torsion(&grid, &params, &GridField::constant(&grid, 1.0), &cfg)?;
                println!(
                    "{name:<13} p = {:<3} {interpolation:?}: sup u = {:.5}, fallback = {}",
                    params.p.to_string(),
                    u.sup(),
                    report.monotone_fallback
                );
            }
            if name == "square" {
                let inner = exact_ball_torsion(&params, 0.5, &[0.0, 0.0])?;
                let outer = exact_ball_torsion(&params, 0.5f64.sqrt(), &[0.0, 0.0])?;
                println!("{:<13} disk bounds: {inner:.5} <= sup u <= {outer:.5}", "");
            }
        }
    }
    Ok(())
}
