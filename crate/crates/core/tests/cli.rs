use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    dir: PathBuf,
}

impl Run {
    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.dir.join(name)).unwrap()).unwrap()
    }
}

fn run(dir: &Path, config: Option<&str>, args: &[&str]) -> Run {
    std::fs::create_dir_all(dir).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_concavity"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("run.toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    let output = cmd.output().unwrap();
    Run { code: output.status.code().unwrap(), dir: dir.join("out") }
}

#[test]
fn verify_ops_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run(&tmp.path().join("a"), None, &["verify-ops"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.json("verify_ops.json")["passed"], true);
    let b = run(&tmp.path().join("b"), None, &["verify-ops", "--seed", "99"]);
    assert_eq!(b.code, 0);
    let bad = run(&tmp.path().join("c"), Some("[operator]\np = 1.5\nalpha = 0.0\n"), &["verify-ops"]);
    assert_eq!(bad.code, 64);
}

#[test]
fn torsion_on_the_disk_and_square() {
    let tmp = tempfile::tempdir().unwrap();
    let disk = run(&tmp.path().join("disk"), None, &["torsion"]);
    assert_eq!(disk.code, 0);
    let report = disk.json("torsion.json");
    assert!((report["sup"].as_f64().unwrap() - 0.5).abs() < 0.01, "{}", report["sup"]);
    for file in ["u.csv", "u.pgm", "envelope.csv", "w.csv", "w.pgm", "defect.pgm", "hopf.csv"] {
        assert!(disk.dir.join(file).is_file(), "{file}");
    }

    let square = "h = 0.03125\n[domain]\nshape = \"polygon\"\nvertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]\n[operator]\np = \"inf\"\nalpha = 2.0\n";
    assert_eq!(run(&tmp.path().join("square"), Some(square), &["torsion"]).code, 0);

    let strict = run(&tmp.path().join("strict"), Some("h = 0.03125\n[certify]\ndefect_tolerance = 0.0\n"), &["torsion"]);
    assert_eq!(strict.code, 1);
    assert_eq!(strict.json("torsion.json")["passed"], false);
}

#[test]
fn eigen_values() {
    let tmp = tempfile::tempdir().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    let cases = [
        ("disk", "", 2.404825557695773f64.powi(2) / 2.0, 0.02),
        ("square", "[domain]\nshape = \"polygon\"\nvertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]\n", pi2, 0.02),
        ("interval", "h = 0.005\n[domain]\nshape = \"interval\"\na = -1.0\nb = 1.0\n", pi2 / 8.0, 0.01),
    ];
    for (name, config, exact, tol) in cases {
        let r = run(&tmp.path().join(name), Some(config), &["eigen"]);
        assert_eq!(r.code, 0, "{name}");
        let lambda = r.json("eigen.json")["eigen"]["lambda"].as_f64().unwrap();
        assert!((lambda / exact - 1.0).abs() <= tol, "{name}: {lambda} vs {exact}");
        assert!(r.dir.join("eigen_trace.csv").is_file());
    }
    let stalled = run(&tmp.path().join("stalled"), Some("[eigen]\nmax_iterations = 2\n"), &["eigen"]);
    assert_eq!(stalled.code, 2);
}

#[test]
fn barrier_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&tmp.path().join("default"), None, &["barrier"]);
    assert_eq!(r.code, 0);
    assert!(r.json("barrier.json")["torsion_residual"].as_f64().unwrap() <= 1e-8);

    let flat = run(&tmp.path().join("flat"), Some("[barrier]\nk = 0.0\n"), &["barrier"]);
    assert_eq!(flat.code, 0);
    let profile = std::fs::read_to_string(flat.dir.join("barrier_profile.csv")).unwrap();
    let rows: Vec<&str> = profile.lines().skip(1).collect();
    assert_eq!(rows.len(), 21);
    for row in rows {
        let value: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(value, 0.0, "{row}");
    }

    assert_eq!(run(&tmp.path().join("broken"), Some("[barrier\nk = 1"), &["barrier"]).code, 64);
    assert_eq!(run(&tmp.path().join("missing"), None, &["barrier", "--config", "/nonexistent/run.toml"]).code, 64);
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("same");
    let config = "h = 0.03125\nseed = 5\n";
    let first = run(&dir, Some(config), &["torsion"]);
    let snapshot: Vec<(String, Vec<u8>)> = files(&first.dir);
    let second = run(&dir, Some(config), &["torsion"]);
    assert_eq!(first.code, second.code);
    assert_eq!(snapshot, files(&second.dir));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn certify_a_dumped_field() {
    let tmp = tempfile::tempdir().unwrap();
    let config = "h = 0.03125\npipeline = \"torsion\"\n";
    let solved = run(&tmp.path().join("solve"), Some(config), &["torsion"]);
    assert_eq!(solved.code, 0);
    let field = solved.dir.join("u.csv");
    let again = run(&tmp.path().join("again"), Some(config), &["certify", "--field", field.to_str().unwrap()]);
    assert_eq!(again.code, 0);
    let report = again.json("certify.json");
    assert_eq!(report["reports"].as_array().unwrap().len(), 1);
    let before = solved.json("torsion.json")["certification"]["relative_defect"].as_f64().unwrap();
    let after = report["reports"][0]["relative_defect"].as_f64().unwrap();
    assert!((before - after).abs() <= 1e-9, "{before} vs {after}");

    // A dump on a different grid does not cover every node.
    let coarse = run(&tmp.path().join("coarse"), Some("h = 0.03\n"), &["certify", "--field", field.to_str().unwrap()]);
    assert_ne!(coarse.code, 0);
}

#[test]
fn param_grid_writes_one_directory_per_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), None, &["verify-ops", "--param-grid", "2:0,inf:2"]);
    assert_eq!(r.code, 0);
    assert!(r.dir.join("p2_alpha0/verify_ops.json").is_file());
    assert!(r.dir.join("pinf_alpha2/verify_ops.json").is_file());
    assert_eq!(run(&tmp.path().join("bad"), None, &["verify-ops", "--param-grid", "2-0"]).code, 64);
}
