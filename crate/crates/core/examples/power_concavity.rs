//! Power concavity of torsion solutions: the defect between w = -u^((a+1)/(a+2))
//! and its convex envelope, and whether the envelope leans on the boundary.
//!
//! cargo run --release --example power_concavity

use std::sync::Arc;

use concavity::certify::{analyze, TransformKind, DEFECT_TOLERANCE};
use concavity::domain::{ConvexDomain, Grid};
use concavity::operator::OperatorParams;
use concavity::solver::{solve_torsion, GridField, SchemeConfig};

fn main() -> concavity::Result<()> {
    let domains = [
        ("disk", ConvexDomain::disk([0.0, 0.0], 1.0)?),
        ("square", ConvexDomain::rectangle(0.0, 0.0, 1.0, 1.0)?),
        ("quadrilateral", ConvexDomain::polygon(vec![[0.0, 0.0], [1.2, 0.1], [1.0, 0.9], [0.15, 0.7]])?),
    ];
    for (name, domain) in domains {
        let grid = Arc::new(Grid::new(&domain, 1.0 / 32.0)?);
        for params in [OperatorParams::finite(2.0, 0.0, 2)?, OperatorParams::finite(3.0, 1.0, 2)?, OperatorParams::infinity(2.0, 2)?] {
            let (u, _) = solve_torsion(&grid, &params, &GridField::constant(&grid, 1.0), &SchemeConfig::default())?;
            let report = analyze(&u, &params, TransformKind::Power)?.report;
            println!(
                "{name:<13} p = {:<3}: relative defect {:.2e} (tolerance {DEFECT_TOLERANCE:.0e}), {} non-trivial contacts, boundary spanning {}",
                params.p.to_string(),
                report.relative_defect,
                report.nontrivial_contacts,
                report.boundary_spanning
            );
        }
    }
    Ok(())
}
