//! Command-line pipelines: axiom checks, torsion and eigen solves with their
//! certificates, barrier sweeps, and re-certification of dumped fields.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0  | every check passed |
//! | 1  | a certification check failed or could not be completed |
//! | 2  | a solver did not converge |
//! | 64 | invalid command line or configuration |
//! | 74 | a file could not be read or written |

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::axioms::{check_all, AxiomReport};
use crate::barriers::{
    barrier_profile, comparison_check, comparison_tolerance, eigen_barrier_residual, hopf_bound, torsion_barrier_residual, BarrierSpec,
    ProfileRow,
};
use crate::certify::{
    analyze, hopf_prediction, hopf_quotients, midpoint_concavity, transformed_residual_eigen, transformed_residual_eigen_beyond,
    transformed_residual_torsion, transformed_residual_torsion_beyond, Analysis, ConcavityReport, TransformKind, TransformedResidual,
};
use crate::config::{Pipeline, RunConfig};
use crate::domain::{Point, Shape};
use crate::eigen::{solve_eigen, EigenSummary};
use crate::error::{Error, Result};
use crate::operator::{c_f, c_f_from_eval, c_q, c_q_from_eval, Exponent, OperatorParams};
use crate::output::{save_pgm, write_json, write_with};
use crate::solver::{solve_torsion, GridField, SolveReport};

/// Process exit status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    CertificationFailure,
    SolverFailure,
    ConfigError,
    IoError,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::CertificationFailure => 1,
            Outcome::SolverFailure => 2,
            Outcome::ConfigError => 64,
            Outcome::IoError => 74,
        }
    }

    fn from_passed(passed: bool) -> Self {
        if passed {
            Outcome::Success
        } else {
            Outcome::CertificationFailure
        }
    }
}

/// Exit status for an error that ended a run.
pub fn outcome_of(err: &Error) -> Outcome {
    match err {
        Error::Config(_) | Error::InvalidParams(_) | Error::InvalidDomain(_) | Error::GridTooCoarse { .. } | Error::InvalidArgument(_) => {
            Outcome::ConfigError
        }
        Error::Io(_) | Error::Json(_) => Outcome::IoError,
        Error::NegativeValue { .. } | Error::DegenerateCloud(_) | Error::ComparisonPrecondition(_) | Error::WrongKind { .. } => {
            Outcome::CertificationFailure
        }
        _ => Outcome::SolverFailure,
    }
}

#[derive(Debug, Parser)]
#[command(name = "concavity", version, about = "Torsion and eigen solvers with concavity certificates for -|Du|^a Np u")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Grid spacing (overrides the config).
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Repeats the command for each `p:alpha` pair, e.g. `2:0,3:1,inf:2`,
    /// writing into one subdirectory per pair.
    #[arg(long, global = true)]
    pub param_grid: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural axiom, constant and reciprocal-concavity checks.
    VerifyOps,
    /// Torsion solve with power-concavity certificate.
    Torsion,
    /// Principal eigenpair with log-concavity certificate.
    Eigen,
    /// Barrier residual sweep, profile and Hopf bound tables.
    Barrier,
    /// Re-runs certification on a dumped field (`x,y,u` CSV).
    Certify {
        #[arg(long)]
        field: PathBuf,
        /// Eigenvalue for the transformed eigen residual.
        #[arg(long)]
        lambda: Option<f64>,
    },
}

/// Parses `2:0,3:1,inf:2`.
pub fn parse_param_grid(text: &str) -> Result<Vec<(Exponent, f64)>> {
    text.split(',')
        .map(|pair| {
            let (p, a) = pair.split_once(':').ok_or_else(|| Error::Config(format!("`{pair}` is not of the form p:alpha")))?;
            let alpha = a.trim().parse::<f64>().map_err(|_| Error::Config(format!("cannot parse alpha in `{pair}`")))?;
            Ok((p.parse().map_err(|e: Error| Error::Config(e.to_string()))?, alpha))
        })
        .collect()
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out.clone_from(out);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(h) = cli.h {
        cfg.h = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the parsed command and returns the worst outcome over all runs.
pub fn execute(cli: &Cli) -> Outcome {
    let report = |e: &Error| {
        eprintln!("error: {e}");
        outcome_of(e)
    };
    let cfg = match base_config(cli) {
        Ok(cfg) => cfg,
        Err(e) => return report(&e),
    };
    let Some(grid) = &cli.param_grid else {
        return run_one(&cli.command, &cfg).unwrap_or_else(|e| report(&e));
    };
    let pairs = match parse_param_grid(grid) {
        Ok(pairs) => pairs,
        Err(e) => return report(&e),
    };
    let mut worst = Outcome::Success;
    for (p, alpha) in pairs {
        let mut one = cfg.clone();
        one.operator.p = p;
        one.operator.alpha = alpha;
        one.out = cfg.out.join(format!("p{p}_alpha{alpha}"));
        let outcome = one.validate().and_then(|_| run_one(&cli.command, &one)).unwrap_or_else(|e| report(&e));
        worst = worst.max(outcome);
    }
    worst
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli).code(),
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if usage {
                Outcome::ConfigError.code()
            } else {
                0
            }
        }
    }
}

fn run_one(command: &Command, cfg: &RunConfig) -> Result<Outcome> {
    std::fs::create_dir_all(&cfg.out)?;
    match command {
        Command::VerifyOps => verify_ops(cfg),
        Command::Torsion => torsion(cfg),
        Command::Eigen => eigen(cfg),
        Command::Barrier => barrier(cfg),
        Command::Certify { field, lambda } => certify(cfg, field, *lambda),
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'static str,
    passed: bool,
    exit_code: i32,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn finish<T: Serialize>(cfg: &RunConfig, command: &'static str, passed: bool, body: T) -> Result<Outcome> {
    let outcome = Outcome::from_passed(passed);
    let file = cfg.out.join(format!("{}.json", command.replace('-', "_")));
    write_json(&file, &Envelope { command, passed, exit_code: outcome.code(), config: cfg, body })?;
    Ok(outcome)
}

#[derive(Serialize)]
struct ConstantsCheck {
    n: usize,
    c_f: f64,
    c_q: f64,
    c_f_extracted: f64,
    c_q_extracted: f64,
    ordered: bool,
    passed: bool,
}

#[derive(Serialize)]
struct VerifyBody {
    constants: Vec<ConstantsCheck>,
    axioms: Vec<AxiomReport>,
    failures: Vec<AxiomReport>,
}

fn verify_ops(cfg: &RunConfig) -> Result<Outcome> {
    let mut constants = Vec::new();
    let mut axioms = Vec::new();
    for &n in &cfg.verify.dims {
        let params = cfg.operator.params(n)?;
        let q: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64).collect();
        let (cf, cq) = (c_f(&params), c_q(&params));
        let (ef, eq) = (c_f_from_eval(&params, &q)?, c_q_from_eval(&params, &q)?);
        let passed = (cf - ef).abs() <= 1e-12 * cf.max(1.0) && (cq - eq).abs() <= 1e-12 && 0.0 <= cq && cq <= cf;
        constants.push(ConstantsCheck { n, c_f: cf, c_q: cq, c_f_extracted: ef, c_q_extracted: eq, ordered: 0.0 <= cq && cq <= cf, passed });
        for mut report in check_all(&params, cfg.verify.samples, cfg.seed)? {
            report.axiom = format!("{} (n={n})", report.axiom);
            axioms.push(report);
        }
    }
    let failures: Vec<AxiomReport> = axioms.iter().filter(|r| !r.passed).cloned().collect();
    let passed = failures.is_empty() && constants.iter().all(|c| c.passed);
    for r in &axioms {
        println!("{:<40} worst {:.3e}  {}", r.axiom, r.worst_violation, if r.passed { "pass" } else { "FAIL" });
    }
    finish(cfg, "verify-ops", passed, VerifyBody { constants, axioms, failures })
}

#[derive(Serialize)]
struct GridSummary {
    h: f64,
    nodes: usize,
    inside_nodes: usize,
}

#[derive(Serialize)]
struct ComparisonSummary {
    tolerance: f64,
    violations: Vec<(usize, usize)>,
    precondition_failures: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct TorsionBody {
    grid: GridSummary,
    sup: f64,
    argmax: Option<Point>,
    solve: SolveReport,
    certification: ConcavityReport,
    comparison: Option<ComparisonSummary>,
}

fn grid_summary(u: &GridField) -> GridSummary {
    let g = u.grid();
    GridSummary { h: g.h(), nodes: g.node_count(), inside_nodes: g.inside_count() }
}

/// Hopf radii `m h` inside `(2h, inradius/2)`.
fn hopf_radii(cfg: &RunConfig) -> Vec<f64> {
    let limit = cfg.domain.inradius() / 2.0;
    cfg.certify.hopf_radii.iter().map(|m| m * cfg.h).filter(|&r| r < limit).collect()
}

/// Envelope, midpoint and Hopf checks shared by every pipeline.
fn certify_field(cfg: &RunConfig, u: &GridField, params: &OperatorParams, kind: TransformKind, with_bound: bool) -> Result<Analysis> {
    let mut analysis = analyze(u, params, kind)?;
    let c = &cfg.certify;
    analysis.report.midpoint = Some(midpoint_concavity(u, params, kind, c.midpoint_pairs, cfg.seed)?);
    let radii = hopf_radii(cfg);
    if !radii.is_empty() {
        let mut table = hopf_quotients(u, c.hopf_samples, &radii)?;
        if with_bound {
            table.bound = Some(hopf_prediction(&cfg.domain, params, c.hopf_samples, 0.5, 1.0)?);
        }
        analysis.report.hopf = Some(table);
    }
    Ok(analysis)
}

fn report_passes(cfg: &RunConfig, report: &ConcavityReport) -> bool {
    report.relative_defect < cfg.certify.defect_tolerance && !report.boundary_spanning && report.hopf.as_ref().is_none_or(|t| t.c > 0.0)
}

fn dump_analysis(cfg: &RunConfig, analysis: &Analysis, prefix: &str) -> Result<()> {
    let out = &cfg.out;
    write_with(&out.join(format!("{prefix}envelope.csv")), |w| analysis.write_csv(w))?;
    analysis.transformed.field().write_csv(File::create(out.join(format!("{prefix}w.csv")))?, "w")?;
    save_pgm(analysis.transformed.field(), &out.join(format!("{prefix}w.pgm")))?;
    save_pgm(&analysis.defect_field(), &out.join(format!("{prefix}defect.pgm")))?;
    if let Some(table) = &analysis.report.hopf {
        write_with(&out.join(format!("{prefix}hopf.csv")), |w| table.write_csv(w))?;
    }
    Ok(())
}

fn summary_line(name: &str, report: &ConcavityReport, passed: bool) {
    println!(
        "{name}: relative defect {:.3e}, boundary spanning {}, hopf c {}  {}",
        report.relative_defect,
        report.boundary_spanning,
        report.hopf.as_ref().map_or("-".to_string(), |t| format!("{:.4}", t.c)),
        if passed { "pass" } else { "FAIL" }
    );
}

fn disk_comparison(cfg: &RunConfig, u: &GridField, params: &OperatorParams) -> Result<Option<ComparisonSummary>> {
    let Shape::Disk { center, radius } = cfg.domain.shape() else {
        return Ok(None);
    };
    let mut spec = BarrierSpec::new(*params, center.to_vec(), 0.0, 1.0)?;
    spec.offset = spec.coefficient() * radius.powf(spec.exponent());
    let tolerance = comparison_tolerance(u, false);
    let (violations, precondition_failures) = match comparison_check(u, &spec, u.grid().inside_nodes(), tolerance) {
        Ok(v) => (v, Vec::new()),
        Err(Error::ComparisonPrecondition(failed)) => (Vec::new(), failed),
        Err(e) => return Err(e),
    };
    Ok(Some(ComparisonSummary { tolerance, violations, precondition_failures }))
}

fn torsion(cfg: &RunConfig) -> Result<Outcome> {
    let (grid, params) = (cfg.grid()?, cfg.params()?);
    let (u, solve) = solve_torsion(&grid, &params, &GridField::constant(&grid, 1.0), &cfg.scheme)?;
    let mut analysis = certify_field(cfg, &u, &params, TransformKind::Power, true)?;
    let layer = cfg.certify.residual_layer;
    analysis.report.transformed_residual = Some(TransformedResidual {
        near: transformed_residual_torsion(&analysis.transformed, &params, &cfg.scheme)?,
        layer,
        far: transformed_residual_torsion_beyond(&analysis.transformed, &params, &cfg.scheme, layer)?,
    });
    let comparison = disk_comparison(cfg, &u, &params)?;
    let passed = report_passes(cfg, &analysis.report);
    u.write_csv(File::create(cfg.out.join("u.csv"))?, "u")?;
    save_pgm(&u, &cfg.out.join("u.pgm"))?;
    dump_analysis(cfg, &analysis, "")?;
    println!("torsion: sup u {:.6}, residual {:.2e}, newton steps {}", u.sup(), solve.residual, solve.total_iterations);
    summary_line("power concavity", &analysis.report, passed);
    let body = TorsionBody {
        grid: grid_summary(&u),
        sup: u.sup(),
        argmax: u.argmax().map(|k| grid.point(k)),
        solve,
        certification: analysis.report,
        comparison,
    };
    finish(cfg, "torsion", passed, body)
}

#[derive(Serialize)]
struct EigenBody {
    grid: GridSummary,
    eigen: EigenSummary,
    certification: ConcavityReport,
}

fn eigen(cfg: &RunConfig) -> Result<Outcome> {
    let (grid, params) = (cfg.grid()?, cfg.params()?);
    let result = solve_eigen(&grid, &params, &cfg.scheme, &cfg.eigen)?;
    let u = &result.eigenfield;
    let mut analysis = certify_field(cfg, u, &params, TransformKind::Log, false)?;
    let layer = cfg.certify.residual_layer;
    analysis.report.transformed_residual = Some(TransformedResidual {
        near: transformed_residual_eigen(&analysis.transformed, result.lambda, &params, &cfg.scheme)?,
        layer,
        far: transformed_residual_eigen_beyond(&analysis.transformed, result.lambda, &params, &cfg.scheme, layer)?,
    });
    let passed = report_passes(cfg, &analysis.report);
    u.write_csv(File::create(cfg.out.join("eigenfield.csv"))?, "u")?;
    write_with(&cfg.out.join("eigen_trace.csv"), |w| result.write_trace_csv(w))?;
    save_pgm(u, &cfg.out.join("eigenfield.pgm"))?;
    dump_analysis(cfg, &analysis, "")?;
    let summary = result.summary(&params, &cfg.scheme)?;
    println!("eigen: lambda {:.6}, iterations {}, residual {:.2e}", summary.lambda, summary.iterations, summary.residual);
    summary_line("log concavity", &analysis.report, passed);
    finish(cfg, "eigen", passed, EigenBody { grid: grid_summary(u), eigen: summary, certification: analysis.report })
}

#[derive(Serialize)]
struct HopfBoundRow {
    radius: f64,
    bound: f64,
}

#[derive(Serialize)]
struct BarrierBody {
    n: usize,
    k: f64,
    offset: f64,
    points: usize,
    /// `max |F(grad Phi, D^2 Phi) - K|`.
    torsion_residual: f64,
    /// `max (F(grad Psi, D^2 Psi) - K |Psi|^alpha Psi)`, expected `<= 0`.
    eigen_residual: f64,
    profile: Vec<ProfileRow>,
    hopf_bounds: Vec<HopfBoundRow>,
}

/// Residual bound for the torsion barrier, scaled by `max(1, K)`.
const BARRIER_TOLERANCE: f64 = 1e-8;
/// One-sided bound for the exponential barrier.
const EXP_BARRIER_TOLERANCE: f64 = 1e-10;

fn barrier(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let b = &cfg.barrier;
    let n = params.n;
    let spec = BarrierSpec::new(params, vec![0.0; n], b.offset, b.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut torsion_residual, mut eigen_residual) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..b.points {
        let x = loop {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-b.radius..=b.radius)).collect();
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r <= b.radius && r > 1e-6 * b.radius {
                break x;
            }
        };
        torsion_residual = torsion_residual.max(torsion_barrier_residual(&spec, &x)?.abs());
        eigen_residual = eigen_residual.max(eigen_barrier_residual(&spec, &x)?);
    }
    let radii: Vec<f64> = (1..=b.profile_rows).map(|i| b.radius * i as f64 / b.profile_rows as f64).collect();
    let profile = barrier_profile(&spec, &radii, false)?;
    let hopf_bounds = if b.k > 0.0 {
        b.hopf_radii.iter().map(|&radius| Ok(HopfBoundRow { radius, bound: hopf_bound(&params, radius, 0.5, b.k, 1.0)? })).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    write_with(&cfg.out.join("barrier_profile.csv"), |w| {
        use std::io::Write;
        writeln!(w, "r,value,gradient_norm,residual")?;
        for row in &profile {
            writeln!(w, "{},{},{},{}", row.r, row.value, row.gradient_norm, row.residual)?;
        }
        Ok(())
    })?;
    let passed = torsion_residual <= BARRIER_TOLERANCE * b.k.max(1.0) && eigen_residual <= EXP_BARRIER_TOLERANCE;
    println!(
        "barrier: max |F(Phi) - K| {torsion_residual:.2e}, max F(Psi) - K Psi^(alpha+1) {eigen_residual:.2e}  {}",
        if passed { "pass" } else { "FAIL" }
    );
    let body = BarrierBody { n, k: b.k, offset: b.offset, points: b.points, torsion_residual, eigen_residual, profile, hopf_bounds };
    finish(cfg, "barrier", passed, body)
}

#[derive(Serialize)]
struct CertifyBody {
    field: PathBuf,
    grid: GridSummary,
    reports: Vec<ConcavityReport>,
}

fn certify(cfg: &RunConfig, field: &Path, lambda: Option<f64>) -> Result<Outcome> {
    let (grid, params) = (cfg.grid()?, cfg.params()?);
    let file = File::open(field).map_err(|e| Error::Config(format!("{}: {e}", field.display())))?;
    let u = GridField::read_csv(&grid, BufReader::new(file))?;
    let kinds: &[TransformKind] = match cfg.pipeline {
        Pipeline::Torsion => &[TransformKind::Power],
        Pipeline::Eigen => &[TransformKind::Log],
        Pipeline::Both => &[TransformKind::Power, TransformKind::Log],
    };
    let layer = cfg.certify.residual_layer;
    let mut passed = true;
    let mut reports = Vec::new();
    for &kind in kinds {
        let mut analysis = certify_field(cfg, &u, &params, kind, kind == TransformKind::Power)?;
        let w = &analysis.transformed;
        analysis.report.transformed_residual = match (kind, lambda) {
            (TransformKind::Power, _) => Some(TransformedResidual {
                near: transformed_residual_torsion(w, &params, &cfg.scheme)?,
                layer,
                far: transformed_residual_torsion_beyond(w, &params, &cfg.scheme, layer)?,
            }),
            (TransformKind::Log, Some(l)) => Some(TransformedResidual {
                near: transformed_residual_eigen(w, l, &params, &cfg.scheme)?,
                layer,
                far: transformed_residual_eigen_beyond(w, l, &params, &cfg.scheme, layer)?,
            }),
            (TransformKind::Log, None) => None,
        };
        let ok = report_passes(cfg, &analysis.report);
        let prefix = match kind {
            TransformKind::Power => "certify_power_",
            TransformKind::Log => "certify_log_",
        };
        dump_analysis(cfg, &analysis, prefix)?;
        summary_line(prefix.trim_start_matches("certify_").trim_end_matches('_'), &analysis.report, ok);
        passed &= ok;
        reports.push(analysis.report);
    }
    finish(cfg, "certify", passed, CertifyBody { field: field.to_path_buf(), grid: grid_summary(&u), reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_grid_parsing() {
        let pairs = parse_param_grid("2:0, 3:1,inf:2").unwrap();
        assert_eq!(pairs, vec![(Exponent::Finite(2.0), 0.0), (Exponent::Finite(3.0), 1.0), (Exponent::Infinity, 2.0)]);
        assert!(parse_param_grid("2").is_err());
        assert!(parse_param_grid("x:1").is_err());
    }

    #[test]
    fn error_mapping() {
        assert_eq!(outcome_of(&Error::Config("x".into())), Outcome::ConfigError);
        assert_eq!(outcome_of(&Error::NoConvergence { iterations: 1, residual: 1.0 }), Outcome::SolverFailure);
        assert_eq!(outcome_of(&Error::EigenNoConvergence { iterations: 1, change: 1.0 }), Outcome::SolverFailure);
        assert_eq!(outcome_of(&Error::DegenerateCloud("x".into())), Outcome::CertificationFailure);
        assert_eq!(outcome_of(&Error::Io(std::io::Error::other("x"))), Outcome::IoError);
        assert_eq!([Outcome::Success, Outcome::CertificationFailure, Outcome::SolverFailure, Outcome::ConfigError].map(Outcome::code), [0, 1, 2, 64]);
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run(["concavity"]), 64);
        assert_eq!(run(["concavity", "torsion", "--h", "abc"]), 64);
        assert_eq!(run(["concavity", "--help"]), 0);
    }
}
