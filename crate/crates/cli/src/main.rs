//! `gqlab` command line: run verification suites, re-emit reports, compare
//! against golden files.
//!
//! Exit status: 0 pass, 1 check failure or drift, 2 configuration error,
//! 3 internal or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gqlab::harness::{
    compare, emit_tables, resolve_out_dir, run_suite, ConfigError, Format, ScenarioConfig, Suite, VerificationReport,
};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "gqlab", version, about = "Verification runner for Kähler quantization transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a suite and write its report.
    Verify(VerifyArgs),
    /// Re-emit a JSON report in another format.
    Table(TableArgs),
    /// Compare a report with a golden file.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
struct RunOptions {
    /// Suite name (overrides the config).
    #[arg(long)]
    suite: Option<String>,
    /// JSON scenario config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "tol-scale")]
    tol_scale: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    run: RunOptions,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; may be repeated.
    #[arg(long, default_value = "json")]
    format: Vec<String>,
    /// Record wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
    /// Print every check, not only failures.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// JSON report to read.
    report: PathBuf,
    #[arg(long, default_value = "csv")]
    format: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Golden JSON report.
    golden: PathBuf,
    /// Report to compare; when absent the golden's suite is re-run.
    #[arg(long)]
    current: Option<PathBuf>,
    #[command(flatten)]
    run: RunOptions,
}

enum Failure {
    Config(String),
    Internal(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn formats(names: &[String]) -> Result<Vec<Format>, Failure> {
    let mut out = Vec::new();
    for n in names {
        let f: Format = n.parse()?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

fn build_config(opts: &RunOptions, fallback: Option<(Suite, u64)>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &opts.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => {
            let suite = match (&opts.suite, fallback) {
                (Some(s), _) => s.parse()?,
                (None, Some((s, _))) => s,
                (None, None) => return Err(Failure::Config("suite: pass --suite or --config".into())),
            };
            let mut c = ScenarioConfig::new(suite);
            if let Some((_, seed)) = fallback {
                c.seed = seed;
            }
            c
        }
    };
    if let (Some(s), Some(_)) = (&opts.suite, &opts.config) {
        cfg.suite = s.parse()?;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(t) = opts.tol_scale {
        cfg.tol_scale = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_report(path: &Path) -> Result<VerificationReport, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
    VerificationReport::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn print_summary(report: &VerificationReport, verbose: bool) {
    for c in &report.checks {
        if verbose || (!c.pass && !c.diagnostic) {
            let tag = match (c.pass, c.diagnostic) {
                (true, _) => "ok  ",
                (false, true) => "note",
                (false, false) => "FAIL",
            };
            println!("{tag} {:<56} measured {:<12.4e} expected {:<12.4e} tol {:.1e}", c.id, c.measured, c.expected, c.tol);
        }
    }
    let diag = report.checks.iter().filter(|c| c.diagnostic).count();
    println!(
        "{}: {} checks, {} failed, {} diagnostic -> {}",
        report.suite,
        report.checks.len(),
        report.failures().len(),
        diag,
        if report.passed() { "PASS" } else { "FAIL" }
    );
}

fn verify(args: VerifyArgs) -> Result<u8, Failure> {
    let mut cfg = build_config(&args.run, None)?;
    cfg.timings |= args.timings;
    let fmts = formats(&args.format)?;
    let report = run_suite(&cfg)?;
    let dir = resolve_out_dir(args.out.as_deref(), &cfg);
    let files = emit_tables(&report, &dir, &fmts).map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
    print_summary(&report, args.verbose);
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(if report.passed() { 0 } else { EXIT_FAIL })
}

fn table(args: TableArgs) -> Result<u8, Failure> {
    let report = read_report(&args.report)?;
    let fmts = formats(&args.format)?;
    let dir = args.out.clone().unwrap_or_else(|| args.report.parent().map(Path::to_path_buf).unwrap_or_default());
    let files = emit_tables(&report, &dir, &fmts).map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(0)
}

fn compare_cmd(args: CompareArgs) -> Result<u8, Failure> {
    let golden = read_report(&args.golden)?;
    let current = match &args.current {
        Some(p) => read_report(p)?,
        None => run_suite(&build_config(&args.run, Some((golden.suite, golden.seed)))?)?,
    };
    let cmp = compare(&golden, &current);
    for d in cmp.drifts.iter().filter(|d| !d.ok) {
        println!("DRIFT {:<56} golden {:.6e} current {:.6e} tol {:.1e}", d.id, d.golden, d.current, d.tol);
    }
    for id in &cmp.missing {
        println!("MISSING {id}");
    }
    for id in &cmp.added {
        println!("NEW {id}");
    }
    let drifted = cmp.drifts.iter().filter(|d| !d.ok).count();
    println!("{}: {} compared, {} drifted, {} missing -> {}", golden.suite, cmp.drifts.len(), drifted, cmp.missing.len(), if cmp.ok() { "OK" } else { "DRIFT" });
    Ok(if cmp.ok() { 0 } else { EXIT_FAIL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = std::panic::catch_unwind(|| match cli.command {
        Command::Verify(a) => verify(a),
        Command::Table(a) => table(a),
        Command::Compare(a) => compare_cmd(a),
    });
    match out {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(Failure::Config(m))) => {
            eprintln!("config error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Ok(Err(Failure::Internal(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INTERNAL)
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
