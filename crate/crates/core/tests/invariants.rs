use concavity::hull::{envelope_1d, envelope_2d, Envelope};
use proptest::prelude::*;

fn lattice(n: usize) -> Vec<[f64; 2]> {
    (0..n * n).map(|k| [(k % n) as f64 / (n - 1) as f64, (k / n) as f64 / (n - 1) as f64]).collect()
}

/// Minorizes, reproduces itself from its contacts, and uses at most `dim + 1` points.
fn check_contacts(points: &[[f64; 2]], w: &[f64], env: &Envelope, dim: usize) -> Result<(), TestCaseError> {
    for (k, contact) in env.contacts.iter().enumerate() {
        prop_assert!(env.values[k] <= w[k] + 1e-12);
        prop_assert!(!contact.is_empty() && contact.len() <= dim + 1);
        prop_assert!(contact.weights.iter().all(|&m| m >= -1e-12));
        prop_assert!((contact.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let mut x = [0.0; 2];
        let mut value = 0.0;
        for (&v, &m) in contact.vertices.iter().zip(&contact.weights) {
            x[0] += m * points[v][0];
            x[1] += m * points[v][1];
            value += m * w[v];
        }
        prop_assert!((x[0] - points[k][0]).abs() <= 1e-9 && (x[1] - points[k][1]).abs() <= 1e-9);
        prop_assert!((value - env.values[k]).abs() <= 1e-9);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interval_envelope(w in prop::collection::vec(-5.0f64..5.0, 2..80)) {
        let n = w.len();
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let env = envelope_1d(&xs, &w).unwrap();
        let points: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        check_contacts(&points, &w, &env, 1)?;
        prop_assert!((env.values[0] - w[0]).abs() <= 1e-12 && (env.values[n - 1] - w[n - 1]).abs() <= 1e-12);
        for i in 1..n - 1 {
            prop_assert!(2.0 * env.values[i] <= env.values[i - 1] + env.values[i + 1] + 1e-9);
        }
        let again = envelope_1d(&xs, &env.values).unwrap();
        for (a, b) in again.values.iter().zip(&env.values) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn lattice_envelope(n in 3usize..12, seed in prop::collection::vec(-3.0f64..3.0, 144)) {
        let points = lattice(n);
        let w: Vec<f64> = (0..n * n).map(|k| seed[k] + 4.0 * (points[k][0] - 0.5).powi(2)).collect();
        let env = envelope_2d(&points, &w).unwrap();
        check_contacts(&points, &w, &env, 2)?;
        // Midpoint convexity along every lattice segment with a lattice midpoint.
        let at = |i: usize, j: usize| env.values[j * n + i];
        for j in 0..n {
            for i in 0..n {
                for (di, dj) in [(1isize, 0isize), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2)] {
                    let (i0, j0, i2, j2) = (i as isize - di, j as isize - dj, i as isize + di, j as isize + dj);
                    let inside = |a: isize| (0..n as isize).contains(&a);
                    if !(inside(i0) && inside(j0) && inside(i2) && inside(j2)) {
                        continue;
                    }
                    let mid = at(i, j);
                    prop_assert!(2.0 * mid <= at(i0 as usize, j0 as usize) + at(i2 as usize, j2 as usize) + 1e-9);
                }
            }
        }
        let again = envelope_2d(&points, &env.values).unwrap();
        for (a, b) in again.values.iter().zip(&env.values) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn affine_fields_are_their_own_envelope(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, n in 3usize..10) {
        let points = lattice(n);
        let w: Vec<f64> = points.iter().map(|p| a * p[0] + b * p[1] + c).collect();
        let env = envelope_2d(&points, &w).unwrap();
        for (e, v) in env.values.iter().zip(&w) {
            prop_assert!((e - v).abs() <= 1e-9);
        }
    }

    #[test]
    fn scattered_envelope(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, -1.0f64..1.0), 4..60)) {
        let mut points = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let mut w = vec![0.3, -0.2, 0.1, 0.0];
        for (x, y, v) in pts {
            points.push([x, y]);
            w.push(v);
        }
        let env = envelope_2d(&points, &w).unwrap();
        check_contacts(&points, &w, &env, 2)?;
    }
}
