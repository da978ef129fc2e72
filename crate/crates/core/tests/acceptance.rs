//! Acceptance checks 1-10. Each prints one `criterion N: PASS|FAIL` line
//! straight to stdout, so the verdicts show up without `--nocapture`.

mod common;

use std::io::Write;
use std::time::Instant;

use common::*;
use concavity::axioms::check_all;
use concavity::barriers::{
    ball_spec, comparison_check, comparison_tolerance, eigen_barrier_residual, exact_ball_torsion, torsion_barrier_residual, BarrierSpec,
};
use concavity::certify::{concavity_defect, hopf_prediction, hopf_quotients, TransformKind, DEFECT_TOLERANCE};
use concavity::domain::ConvexDomain;
use concavity::eigen::{solve_eigen, EigenConfig};
use concavity::hull::{envelope_1d, envelope_2d};
use concavity::operator::{c_f, c_f_from_eval, c_q, c_q_from_eval, Exponent, OperatorParams};
use concavity::solver::{GridField, SchemeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, passed: bool, detail: &str) {
    let line = format!("criterion {n:>2}: {} {detail}\n", if passed { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(passed, "criterion {n} failed: {detail}");
}

fn all_triples() -> Vec<OperatorParams> {
    let mut out = Vec::new();
    for p in [Exponent::Finite(2.0), Exponent::Finite(3.0), Exponent::Finite(10.0), Exponent::Infinity] {
        for alpha in [0.0, 1.0, 2.0] {
            for n in [1, 2, 3] {
                out.push(OperatorParams::new(p, alpha, n).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_01_axiom_suite() {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut failed = Vec::new();
    for (i, params) in all_triples().iter().enumerate() {
        for r in check_all(params, 1000, 1000 + i as u64).unwrap() {
            if r.worst_violation > worst.0 {
                worst = (r.worst_violation, format!("{} at p={} a={} n={}", r.axiom, params.p, params.alpha, params.n));
            }
            if r.worst_violation.is_nan() || r.worst_violation > 1e-9 {
                failed.push(format!("{} p={} a={} n={}", r.axiom, params.p, params.alpha, params.n));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("36 triples x 8 checks x 1000 samples, worst {:.1e} ({}), {secs:.1} s, failures {failed:?}", worst.0, worst.1);
    verdict(1, failed.is_empty() && secs <= 10.0, &detail);
}

#[test]
fn criterion_02_constants() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut ordered = true;
    for params in all_triples() {
        let (cf, cq) = (c_f(&params), c_q(&params));
        let expected = match params.p {
            Exponent::Finite(p) => ((params.n as f64 + p - 2.0) / p, (p - 1.0) / p),
            Exponent::Infinity => (1.0, 1.0),
        };
        worst = worst.max((cf - expected.0).abs()).max((cq - expected.1).abs());
        for _ in 0..20 {
            let q: Vec<f64> = (0..params.n).map(|_| rng.random_range(-3.0..3.0)).collect();
            worst = worst.max((c_f_from_eval(&params, &q).unwrap() - cf).abs());
            worst = worst.max((c_q_from_eval(&params, &q).unwrap() - cq).abs());
        }
        ordered &= 0.0 <= cq && cq <= cf;
    }
    verdict(2, worst <= 1e-12 && ordered, &format!("max deviation {worst:.1e} over 36 triples, 0 <= c_Q <= c_F: {ordered}"));
}

#[test]
fn criterion_03_barrier_residuals() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut torsion, mut eigen) = (0.0f64, f64::NEG_INFINITY);
    for p in [Exponent::Finite(2.0), Exponent::Finite(3.0), Exponent::Finite(10.0), Exponent::Infinity] {
        for alpha in [0.0, 1.0, 2.0] {
            let params = OperatorParams::new(p, alpha, 2).unwrap();
            let spec = BarrierSpec::new(params, vec![0.1, -0.2], 0.5, 1.0).unwrap();
            for _ in 0..1000 {
                let r = rng.random_range(1e-3..2.0);
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                let x = [0.1 + r * t.cos(), -0.2 + r * t.sin()];
                torsion = torsion.max(torsion_barrier_residual(&spec, &x).unwrap().abs());
                eigen = eigen.max(eigen_barrier_residual(&spec, &x).unwrap());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = torsion <= 1e-8 && eigen <= 1e-10 && secs <= 5.0;
    verdict(3, passed, &format!("max |F(Phi) - K| {torsion:.1e}, max F(Psi) - K Psi^(a+1) {eigen:.1e} over 12 pairs x 1000 points, {secs:.1} s"));
}

#[test]
fn criterion_04_solver_vs_oracle() {
    let disk = unit_disk();
    let mut lines = Vec::new();
    let mut passed = true;
    for (params, fine, fine_secs) in fine_disk_solves() {
        let mut errors = Vec::new();
        let mut secs = *fine_secs;
        for n in [32.0, 64.0] {
            let start = Instant::now();
            let u = torsion(&grid(&disk, 1.0 / n), params);
            secs += start.elapsed().as_secs_f64();
            errors.push(relative_error(&u, params));
        }
        errors.push(relative_error(fine, params));
        // A scheme exact on the quadratic profile leaves only round-off to compare.
        let decreasing = errors.windows(2).all(|e| e[1] < e[0] || e[0].max(e[1]) <= 1e-12);
        let ok = errors[2] <= 0.02 && decreasing && secs <= 60.0;
        passed &= ok;
        lines.push(format!("{} {:.2e}/{:.2e}/{:.2e} in {secs:.0} s", label(params), errors[0], errors[1], errors[2]));
    }
    verdict(4, passed, &format!("relative sup error at h=1/32,1/64,1/128: {}", lines.join("; ")));
}

fn relative_error(u: &GridField, params: &OperatorParams) -> f64 {
    let grid = u.grid();
    let peak = exact_ball_torsion(params, 1.0, &[0.0, 0.0]).unwrap();
    grid.inside_nodes().iter().map(|&k| (u.get(k) - exact_ball_torsion(params, 1.0, &grid.point(k)).unwrap()).abs()).fold(0.0, f64::max) / peak
}

#[test]
fn criterion_05_power_concavity() {
    let quad = ConvexDomain::polygon(vec![[0.0, 0.0], [1.2, 0.1], [1.0, 0.9], [0.15, 0.7]]).unwrap();
    let square = ConvexDomain::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
    let mut lines = Vec::new();
    let mut passed = true;
    let mut check = |name: &str, params: &OperatorParams, u: &GridField, solve_secs: f64| {
        let start = Instant::now();
        let r = concavity_defect(u, params, TransformKind::Power).unwrap();
        let secs = solve_secs + start.elapsed().as_secs_f64();
        let ok = r.relative_defect <= DEFECT_TOLERANCE && !r.boundary_spanning && secs <= 120.0;
        passed &= ok;
        lines.push(format!("{name} {} {:.1e}{} {secs:.0}s", label(params), r.relative_defect, if r.boundary_spanning { " spanning" } else { "" }));
    };
    for (params, u, secs) in fine_disk_solves() {
        check("disk", params, u, *secs);
    }
    for (name, domain) in [("square", &square), ("quad", &quad)] {
        let g = grid(domain, 1.0 / 128.0);
        for params in pairs() {
            let start = Instant::now();
            let u = torsion(&g, &params);
            check(name, &params, &u, start.elapsed().as_secs_f64());
        }
    }
    verdict(5, passed, &format!("relative power defect at h=1/128 (tolerance {DEFECT_TOLERANCE:.0e}): {}", lines.join("; ")));
}

#[test]
fn criterion_06_eigenvalues() {
    let laplacian = |n| OperatorParams::finite(2.0, 0.0, n).unwrap();
    let j01: f64 = 2.404825557695773;
    let pi2 = std::f64::consts::PI.powi(2);
    let cases = [
        ("disk", unit_disk(), 1.0 / 64.0, j01 * j01 / 2.0, 0.02),
        ("square", ConvexDomain::rectangle(0.0, 0.0, 1.0, 1.0).unwrap(), 1.0 / 64.0, pi2, 0.02),
        ("interval", ConvexDomain::interval(-1.0, 1.0).unwrap(), 1.0 / 200.0, pi2 / 8.0, 0.01),
    ];
    let mut passed = true;
    let mut lines = Vec::new();
    for (name, domain, h, exact, tol) in cases {
        let e = solve_eigen(&grid(&domain, h), &laplacian(domain.dim()), &SchemeConfig::default(), &EigenConfig::default()).unwrap();
        let rel = (e.lambda / exact - 1.0).abs();
        passed &= rel <= tol;
        lines.push(format!("{name} {:.5} vs {exact:.5} ({:.2}%)", e.lambda, 100.0 * rel));
    }
    verdict(6, passed, &lines.join("; "));
}

#[test]
fn criterion_07_log_concavity() {
    let mut passed = true;
    let mut lines = Vec::new();
    for (name, domain) in [("disk", unit_disk()), ("square", ConvexDomain::rectangle(0.0, 0.0, 1.0, 1.0).unwrap())] {
        let g = grid(&domain, 1.0 / 64.0);
        for params in [OperatorParams::finite(2.0, 0.0, 2).unwrap(), OperatorParams::finite(3.0, 1.0, 2).unwrap()] {
            let e = solve_eigen(&g, &params, &SchemeConfig::default(), &EigenConfig::default()).unwrap();
            let r = concavity_defect(&e.eigenfield, &params, TransformKind::Log).unwrap();
            passed &= r.relative_defect <= DEFECT_TOLERANCE;
            lines.push(format!("{name} {} {:.1e} over {} nodes", label(&params), r.relative_defect, r.tested_nodes));
        }
    }
    verdict(7, passed, &format!("relative log defect past the 3h layer at h=1/64: {}", lines.join("; ")));
}

#[test]
fn criterion_08_hopf() {
    let mut passed = true;
    let mut lines = Vec::new();
    for (params, u, _) in fine_disk_solves() {
        let h = u.grid().h();
        let table = hopf_quotients(u, 16, &[4.0 * h, 8.0 * h, 16.0 * h]).unwrap();
        let bound = hopf_prediction(u.grid().domain(), params, 16, 0.5, 1.0).unwrap();
        let all_below = table.rows.iter().all(|r| r.quotient <= -table.c);
        let ok = all_below && table.c > 0.0 && table.c >= 0.5 * bound.abs();
        passed &= ok;
        lines.push(format!("torsion {} c={:.3} bound={:.3}", label(params), table.c, bound));
    }
    let g = grid(&unit_disk(), 1.0 / 64.0);
    let params = OperatorParams::finite(2.0, 0.0, 2).unwrap();
    let e = solve_eigen(&g, &params, &SchemeConfig::default(), &EigenConfig::default()).unwrap();
    let h = g.h();
    let table = hopf_quotients(&e.eigenfield, 16, &[4.0 * h, 8.0 * h, 16.0 * h]).unwrap();
    passed &= table.c > 0.0;
    lines.push(format!("eigen (2, 0) c={:.3}", table.c));
    verdict(8, passed, &format!("16 samples, r in {{4h, 8h, 16h}}: {}", lines.join("; ")));
}

#[test]
fn criterion_09_comparison() {
    let g = grid(&unit_disk(), 1.0 / 64.0);
    let mut oracle_violations = 0;
    for params in pairs() {
        let u = GridField::from_fn(&g, |x| exact_ball_torsion(&params, 1.0, &x).unwrap());
        let spec = ball_spec(&params, 1.0).unwrap();
        oracle_violations += comparison_check(&u, &spec, g.inside_nodes(), comparison_tolerance(&u, true)).unwrap().len();
    }
    let mut solver_violations = 0;
    let mut solver_preconditions = true;
    for (params, u, _) in fine_disk_solves() {
        let spec = ball_spec(params, 1.0).unwrap();
        match comparison_check(u, &spec, u.grid().inside_nodes(), comparison_tolerance(u, false)) {
            Ok(v) => solver_violations += v.len(),
            Err(_) => solver_preconditions = false,
        }
    }
    let params = OperatorParams::finite(3.0, 1.0, 2).unwrap();
    let mut dipped = GridField::from_fn(&g, |x| exact_ball_torsion(&params, 1.0, &x).unwrap());
    let k = g.index(40, 37);
    dipped.set(k, dipped.get(k) - 0.05);
    let found = comparison_check(&dipped, &ball_spec(&params, 1.0).unwrap(), g.inside_nodes(), comparison_tolerance(&dipped, true)).unwrap();
    let detected = found == vec![g.coords(k)];
    let passed = oracle_violations == 0 && solver_violations == 0 && solver_preconditions && detected;
    verdict(
        9,
        passed,
        &format!("oracle violations {oracle_violations}, solver-field violations {solver_violations} (preconditions hold: {solver_preconditions}), planted dip detected: {detected}"),
    );
}

#[test]
fn criterion_10_envelope_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let field = |rng: &mut ChaCha8Rng, x: f64, y: f64, style: usize| match style % 3 {
        0 => rng.random_range(-1.0..1.0),
        1 => (x - 0.4).powi(2) + (y - 0.6).powi(2) + 0.05 * rng.random_range(-1.0..1.0),
        _ => (5.0 * x).sin() * (3.0 * y).cos() + (rng.random::<f64>() < 0.2) as u8 as f64,
    };
    let mut worst_1d = 0.0f64;
    let mut largest_1d = 0;
    for k in 0..50 {
        let n = 2 + (k * 37) % 199;
        largest_1d = largest_1d.max(n);
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1).max(1) as f64).collect();
        let w: Vec<f64> = xs.iter().map(|&x| field(&mut rng, x, 0.0, k)).collect();
        let env = envelope_1d(&xs, &w).unwrap();
        let brute = brute_1d(&xs, &w);
        worst_1d = env.values.iter().zip(&brute).map(|(a, b)| (a - b).abs()).fold(worst_1d, f64::max);
    }
    let mut worst_2d = 0.0f64;
    for k in 0..50 {
        let n = 3 + k % 18;
        let pts = lattice(n);
        let w: Vec<f64> = pts.iter().map(|p| field(&mut rng, p[0], p[1], k)).collect();
        let env = envelope_2d(&pts, &w).unwrap();
        let brute = brute_lattice(n, &w);
        worst_2d = env.values.iter().zip(&brute).map(|(a, b)| (a - b).abs()).fold(worst_2d, f64::max);
    }
    let passed = worst_1d <= 1e-9 && worst_2d <= 1e-9;
    verdict(10, passed, &format!("max |hull - brute force|: 1D {worst_1d:.1e} (50 fields, up to {largest_1d} nodes), 2D {worst_2d:.1e} (50 fields, up to 20x20)"));
}
