//! `dnsp`: property checks, ℓ¹-synthesis recovery and seeded experiments.
//!
//! Exit codes: 0 when the property holds or a value was computed, 1 when it
//! fails (or an experiment has violations), 2 when undecided, 3 on error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dnsp_core::checkers::{check_dnsp, check_nsp, snsp_constant, spark, DnspDecision, DnspOptions};
use dnsp_core::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use dnsp_core::linalg::DEFAULT_RANK_TOL;
use dnsp_core::recovery::{l1_synthesis_denoise, l1_synthesis_exact, AdmmParams, RecoveryProblem};
use dnsp_core::DenseMatrix;

const EXIT_FAILS: u8 = 1;
const EXIT_UNDECIDED: u8 = 2;
const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "dnsp", version, about = "Null space property checks and l1-synthesis recovery for dictionaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Property {
    Nsp,
    Dnsp,
    Spark,
    Snsp,
}

#[derive(clap::Args)]
struct Tolerances {
    /// Relative rank tolerance.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
    /// Slack used by strict inequalities.
    #[arg(long, default_value_t = dnsp_core::checkers::DEFAULT_STRICT_MARGIN)]
    strict_margin: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Decide or compute a property of (A, D).
    Check {
        #[arg(long, value_enum)]
        property: Property,
        /// Sensing matrix file (not needed for spark).
        #[arg(long)]
        a: Option<PathBuf>,
        /// Dictionary file; defaults to the identity for nsp.
        #[arg(long)]
        d: Option<PathBuf>,
        /// Sparsity order.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = dnsp_core::checkers::DEFAULT_SAMPLING_BUDGET)]
        sampling_budget: usize,
        #[command(flatten)]
        tols: Tolerances,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve min ||z||_1 subject to ||y - ADz||_2 <= eps.
    Recover {
        #[arg(long, required_unless_present = "manifest")]
        a: Option<PathBuf>,
        #[arg(long, required_unless_present = "manifest")]
        d: Option<PathBuf>,
        /// Measurements as a one-row or one-column matrix file.
        #[arg(long, required_unless_present = "manifest")]
        y: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// JSON file {"a", "d", "y", "eps"}; paths are relative to it.
        #[arg(long, conflicts_with_all = ["a", "d", "y"])]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded experiment sweep.
    Experiment {
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        strict_margin: Option<f64>,
        /// JSON object of config overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Deserialize)]
struct Manifest {
    a: PathBuf,
    d: PathBuf,
    y: PathBuf,
    #[serde(default)]
    eps: f64,
}

type CliResult = Result<u8, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code)
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Check {
            property,
            a,
            d,
            k,
            seed,
            sampling_budget,
            tols,
            out,
        } => {
            let opts = DnspOptions {
                tol: tols.tol,
                strict_margin: tols.strict_margin,
                sampling_budget,
                seed,
                ..DnspOptions::default()
            };
            check(property, a.as_deref(), d.as_deref(), k, &opts, out.as_deref())
        }
        Command::Recover {
            a,
            d,
            y,
            eps,
            manifest,
            out,
        } => {
            let (a, d, y, eps) = match manifest {
                Some(m) => {
                    let text = fs::read_to_string(&m).map_err(|e| format!("{}: {e}", m.display()))?;
                    let man: Manifest = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", m.display()))?;
                    let dir = m.parent().unwrap_or(Path::new("."));
                    (dir.join(man.a), dir.join(man.d), dir.join(man.y), man.eps)
                }
                None => (a.expect("required"), d.expect("required"), y.expect("required"), eps),
            };
            recover(&a, &d, &y, eps, out.as_deref())
        }
        Command::Experiment {
            name,
            seed,
            instances,
            tol,
            strict_margin,
            config,
            out,
        } => {
            let kind: ExperimentKind = name.parse().map_err(|e| format!("{e}"))?;
            let mut over = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
                }
                None => serde_json::json!({}),
            };
            let obj = over.as_object_mut().ok_or("config must be a JSON object")?;
            if let Some(s) = seed {
                obj.insert("seed".into(), s.into());
            }
            if let Some(n) = instances {
                obj.insert("instances".into(), n.into());
            }
            if let Some(t) = tol {
                obj.insert("tol".into(), t.into());
            }
            if let Some(s) = strict_margin {
                obj.insert("strict_margin".into(), s.into());
            }
            let cfg = ExperimentConfig::with_overrides(kind, &over).map_err(|e| e.to_string())?;
            let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
            let agg = &report.aggregates;
            eprintln!(
                "{kind}: {} instances, {} agreements, {} violations, {} undecided, {} skipped, {} errors",
                agg.instances, agg.agreements, agg.violations, agg.undecided, agg.skipped, agg.errors
            );
            let out = out.or(cfg.output.clone());
            emit(&report, out.as_deref())?;
            if !report.errors.is_empty() {
                Ok(EXIT_ERROR)
            } else if !report.violations.is_empty() {
                Ok(EXIT_FAILS)
            } else {
                Ok(0)
            }
        }
    }
}

fn read(path: &Path) -> Result<DenseMatrix, String> {
    DenseMatrix::read_file(path).map_err(|e| e.to_string())
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    match out {
        Some(p) => fs::write(p, text + "\n").map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn decision_code(d: DnspDecision) -> u8 {
    match d {
        DnspDecision::Holds => 0,
        DnspDecision::Fails => EXIT_FAILS,
        DnspDecision::Undecided => EXIT_UNDECIDED,
    }
}

fn need<'a>(p: Option<&'a Path>, flag: &str) -> Result<&'a Path, String> {
    p.ok_or_else(|| format!("--{flag} is required for this property"))
}

fn check(property: Property, a: Option<&Path>, d: Option<&Path>, k: usize, opts: &DnspOptions, out: Option<&Path>) -> CliResult {
    let err = |e: dnsp_core::checkers::CheckError| e.to_string();
    match property {
        Property::Spark => {
            let m = read(need(d.or(a), "d")?)?;
            let r = spark(&m, opts.tol).map_err(err)?;
            match r.spark.finite() {
                Some(s) => eprintln!("spark {s}, full_spark {}", r.full_spark),
                None => eprintln!("spark NoDependence, full_spark {}", r.full_spark),
            }
            emit(&r, out)?;
            Ok(0)
        }
        Property::Nsp => {
            let a = read(need(a, "a")?)?;
            let m = match d {
                Some(p) => a.matmul(&read(p)?).map_err(|e| e.to_string())?,
                None => a,
            };
            let r = check_nsp(&m, k, opts.tol, opts.strict_margin).map_err(err)?;
            eprintln!("nsp of order {k}: {}", if r.holds { "holds" } else { "fails" });
            emit(&r, out)?;
            Ok(if r.holds { 0 } else { EXIT_FAILS })
        }
        Property::Dnsp => {
            let (a, d) = (read(need(a, "a")?)?, read(need(d, "d")?)?);
            let r = check_dnsp(&a, &d, k, opts).map_err(err)?;
            eprintln!("d-nsp of order {k}: {:?} via {:?}", r.decision, r.method);
            emit(&r, out)?;
            Ok(decision_code(r.decision))
        }
        Property::Snsp => {
            let (a, d) = (read(need(a, "a")?)?, read(need(d, "d")?)?);
            let r = snsp_constant(&a, &d, k, opts).map_err(err)?;
            eprintln!("strong constant c = {} ({:?})", r.c, r.method);
            emit(&r, out)?;
            Ok(0)
        }
    }
}

fn recover(a: &Path, d: &Path, y: &Path, eps: f64, out: Option<&Path>) -> CliResult {
    let (a, d, ym) = (read(a)?, read(d)?, read(y)?);
    if ym.rows() != 1 && ym.cols() != 1 {
        return Err(format!("y must be a vector, got {}x{}", ym.rows(), ym.cols()));
    }
    let y = ym.as_slice().to_vec();
    let p = RecoveryProblem::new(a, d, y, eps).map_err(|e| e.to_string())?;
    let r = if eps > 0.0 {
        l1_synthesis_denoise(&p, &AdmmParams::default())
    } else {
        l1_synthesis_exact(&p)
    }
    .map_err(|e| e.to_string())?;
    emit(&r, out)?;
    Ok(0)
}
