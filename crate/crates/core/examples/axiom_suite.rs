//! Structural axioms and constants of F(q, X) = -|q|^alpha Np(q, X) for a
//! few (p, alpha, n), with the worst sampled violation of each.
//!
//! cargo run --release --example axiom_suite

use concavity::axioms::check_all;
use concavity::operator::{c_f, c_q, Exponent, OperatorParams};

fn main() -> concavity::Result<()> {
    for (p, alpha, n) in [(Exponent::Finite(2.0), 0.0, 2), (Exponent::Finite(3.0), 1.0, 3), (Exponent::Infinity, 2.0, 2)] {
        let params = OperatorParams::new(p, alpha, n)?;
        println!("p = {p}, alpha = {alpha}, n = {n}: c_F = {:.4}, c_Q = {:.4}", c_f(&params), c_q(&params));
        for report in check_all(&params, 1000, 42)? {
            println!("  {:<28} worst {:.2e}  {}", report.axiom, report.worst_violation, if report.passed { "ok" } else { "VIOLATED" });
        }
    }
    Ok(())
}
