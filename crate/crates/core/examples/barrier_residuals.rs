//! Radial barriers Phi and Psi = exp(Phi): residual of the torsion barrier,
//! sign of the exponential one, and the Hopf bound they imply.
//!
//! cargo run --release --example barrier_residuals

use concavity::barriers::{barrier_profile, eigen_barrier_residual, hopf_bound, torsion_barrier_residual, BarrierSpec};
use concavity::operator::OperatorParams;

fn main() -> concavity::Result<()> {
    for params in [OperatorParams::finite(2.0, 0.0, 2)?, OperatorParams::finite(3.0, 1.0, 2)?, OperatorParams::infinity(2.0, 2)?] {
        let spec = BarrierSpec::new(params, vec![0.0, 0.0], 1.0, 1.0)?;
        let mut worst_phi = 0.0f64;
        let mut worst_psi = f64::NEG_INFINITY;
        for k in 1..=200 {
            let t = k as f64 * 0.1;
            let x = [0.9 * t.cos() * (k as f64 / 200.0), 0.9 * t.sin() * (k as f64 / 200.0)];
            worst_phi = worst_phi.max(torsion_barrier_residual(&spec, &x)?.abs());
            worst_psi = worst_psi.max(eigen_barrier_residual(&spec, &x)?);
        }
        println!("p = {}, alpha = {}: max |F(Phi) - K| = {worst_phi:.1e}, max F(Psi) - K Psi^(alpha+1) = {worst_psi:.2e}", params.p, params.alpha);
        for row in barrier_profile(&spec, &[0.25, 0.5, 1.0], false)? {
            println!("  r = {:.2}: Phi = {:.5}, |grad Phi| = {:.5}", row.r, row.value, row.gradient_norm);
        }
        println!("  Hopf bound (R = 1, eps = 1/2): {:.5}", hopf_bound(&params, 1.0, 0.5, 1.0, 1.0)?);
    }
    Ok(())
}
