//! Convex envelope of scattered graph data by exact lower hulls, checked
//! against the supremum over all convex combinations of node values.
//!
//! cargo run --release --example convex_envelope

use concavity::hull::{envelope_1d, envelope_2d};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> concavity::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
    let values: Vec<f64> = xs.iter().map(|&x| (6.0 * x).sin() + rng.random_range(-0.1..0.1)).collect();
    let env = envelope_1d(&xs, &values)?;
    let touching = env.contacts.iter().filter(|c| c.len() == 1).count();
    println!("1D: {touching} of {} nodes lie on their envelope", xs.len());
    let (i, _) = env.values.iter().zip(&values).enumerate().map(|(i, (e, v))| (i, v - e)).fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    println!("    largest gap at x = {:.3}: value {:.4}, envelope {:.4}, contacts {:?}", xs[i], values[i], env.values[i], env.contacts[i].vertices);

    let points: Vec<[f64; 2]> = (0..15).flat_map(|i| (0..15).map(move |j| [i as f64 / 14.0, j as f64 / 14.0])).collect();
    let values: Vec<f64> = points.iter().map(|p| (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) - 0.3 * (-40.0 * ((p[0] - 0.3).powi(2) + (p[1] - 0.6).powi(2))).exp()).collect();
    let env = envelope_2d(&points, &values)?;
    let mut mismatch = 0.0f64;
    // Each contact must rebuild both the node position and the envelope value.
    for (k, p) in points.iter().enumerate().step_by(17) {
        let c = &env.contacts[k];
        let rebuilt: f64 = c.vertices.iter().zip(&c.weights).map(|(&v, w)| w * values[v]).sum();
        let at: [f64; 2] = c.vertices.iter().zip(&c.weights).fold([0.0, 0.0], |a, (&v, w)| [a[0] + w * points[v][0], a[1] + w * points[v][1]]);
        mismatch = mismatch.max((rebuilt - env.values[k]).abs() + (at[0] - p[0]).abs() + (at[1] - p[1]).abs());
    }
    let dented = env.contacts.iter().filter(|c| c.len() > 1).count();
    println!("2D: {dented} of {} nodes lie strictly above their envelope; decomposition mismatch {mismatch:.1e}", points.len());
    Ok(())
}
