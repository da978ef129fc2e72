//! Drives the command-line front end from a TOML config: a torsion run on an
//! ellipse with its report, then re-certification of the dumped field.
//!
//! cargo run --release --example cli_pipeline

use concavity::cli;

fn main() -> concavity::Result<()> {
    let dir = std::env::temp_dir().join("concavity-cli-example");
    std::fs::create_dir_all(&dir)?;
    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        "h = 0.03125\nseed = 1\n[domain]\nshape = \"ellipse\"\ncenter = [0.0, 0.0]\nsemi_axes = [1.5, 1.0]\n[operator]\np = 3.0\nalpha = 1.0\n",
    )?;
    let out = dir.join("out");
    let (c, o) = (config.to_string_lossy().into_owned(), out.to_string_lossy().into_owned());
    let code = cli::run(["concavity", "torsion", "--config", &c, "--out", &o]);
    println!("torsion exit code {code}");
    let field = out.join("u.csv").to_string_lossy().into_owned();
    let code = cli::run(["concavity", "certify", "--config", &c, "--out", &o, "--field", &field]);
    println!("certify exit code {code}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("torsion.json"))?)?;
    println!("report: sup u = {}, relative defect = {}", report["sup"], report["certification"]["relative_defect"]);
    Ok(())
}
