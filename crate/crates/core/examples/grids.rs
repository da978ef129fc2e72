//! Convex domains and their grids: node classes and cut arms.
//!
//! cargo run --release --example grids

use concavity::domain::{ConvexDomain, Grid, NodeClass};

fn main() -> concavity::Result<()> {
    let domains = [
        ("interval", ConvexDomain::interval(-1.0, 1.0)?),
        ("disk", ConvexDomain::disk([0.0, 0.0], 1.0)?),
        ("square", ConvexDomain::rectangle(0.0, 0.0, 1.0, 1.0)?),
        ("ellipse", ConvexDomain::ellipse([0.0, 0.0], [2.0, 1.0])?),
        ("quadrilateral", ConvexDomain::polygon(vec![[0.0, 0.0], [1.2, 0.1], [1.0, 0.9], [0.15, 0.7]])?),
    ];
    for (name, domain) in domains {
        let grid = Grid::new(&domain, 1.0 / 32.0)?;
        let count = |c: NodeClass| (0..grid.node_count()).filter(|&k| grid.class(k) == c).count();
        let cut = grid.inside_nodes().iter().flat_map(|&k| grid.arms(k)).filter(|a| a.node.is_none() && a.length > 0.0).count();
        println!(
            "{name:<14} inradius {:.4}  interior {:>5}  boundary-adjacent {:>4}  boundary {:>3}  cut arms {:>4}",
            domain.inradius(),
            count(NodeClass::Interior),
            count(NodeClass::BoundaryAdjacent),
            count(NodeClass::Boundary),
            cut
        );
    }
    Ok(())
}
