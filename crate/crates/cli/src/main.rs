use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use warpcheck::campaign;
use warpcheck::checks::CheckKind;
use warpcheck::config::RunConfig;
use warpcheck::identities::identities;
use warpcheck::report::to_json;
use warpcheck::{parse_threads, with_threads, CliError, THREADS_ENV};
use warpcheck_core::catalog::{CaseTag, PdeFamily};

#[derive(Parser)]
#[command(name = "warpcheck", version, about = "Seeded verification of para-Kähler warped-product immersions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run checks on a catalog immersion.
    Verify(Common),
    /// Residuals of an exact solution of the warping PDE system.
    Pde(Common),
    /// Repeat verify (or pde, when --family is set) over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary: h, p, c, eps, seed, samples, c1, c2, d or b1.
        #[arg(long)]
        param: String,
        /// Comma-separated grid; an empty string gives an empty sweep.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Closed-form values and reproducible findings.
    Identities {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List check names.
    ListChecks,
}

#[derive(Args, Default)]
struct Common {
    /// Flat JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_case)]
    case: Option<CaseTag>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    b: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<i8>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, value_parser = parse_family)]
    family: Option<PdeFamily>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    v: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    /// Comma-separated check names (see list-checks).
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_case(s: &str) -> Result<CaseTag, String> {
    CaseTag::parse(s).ok_or_else(|| {
        let names: Vec<&str> = CaseTag::ALL.iter().map(|t| t.name()).collect();
        format!("unknown case {s:?}; one of {}", names.join(", "))
    })
}

fn parse_family(s: &str) -> Result<PdeFamily, String> {
    match s {
        "sol1" => Ok(PdeFamily::Sol1),
        "sol2" => Ok(PdeFamily::Sol2),
        _ => Err(format!("unknown family {s:?}; one of sol1, sol2")),
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let flags = RunConfig {
            case: self.case,
            h: self.h,
            p: self.p,
            a: self.a.clone(),
            b: self.b.clone(),
            eps: self.eps,
            c: self.c,
            family: self.family,
            v: self.v.clone(),
            c1: self.c1,
            c2: self.c2,
            d: self.d,
            checks: self.checks.clone(),
            samples: self.samples,
            seed: self.seed,
            tol_abs: self.tol_abs,
            tol_rel: self.tol_rel,
            out: self.out.clone(),
        };
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(&flags))
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|e| CliError::Config(format!("grid value {v:?}: {e}"))))
        .collect()
}

fn emit<T: Serialize>(report: &T, out: Option<&PathBuf>) -> Result<(), CliError> {
    let body = to_json(report);
    match out {
        Some(path) => std::fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => write_stdout(&body),
    }
}

fn write_stdout(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn status(pass: bool) -> u8 {
    if pass {
        0
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let threads = parse_threads(std::env::var(THREADS_ENV).ok().as_deref())?;
    match cli.command {
        Command::Verify(common) => {
            let cfg = common.resolve()?;
            let report = with_threads(threads, || campaign::verify(&cfg))??;
            emit(&report, cfg.out.as_ref())?;
            Ok(status(report.pass))
        }
        Command::Pde(common) => {
            let cfg = common.resolve()?;
            let report = with_threads(threads, || campaign::pde(&cfg))??;
            emit(&report, cfg.out.as_ref())?;
            Ok(status(report.pass))
        }
        Command::Sweep { common, param, values } => {
            let cfg = common.resolve()?;
            let values = parse_grid(&values)?;
            let report = with_threads(threads, || campaign::sweep(&cfg, &param, &values))??;
            emit(&report, cfg.out.as_ref())?;
            Ok(status(report.pass))
        }
        Command::Identities { out } => {
            let report = identities();
            emit(&report, out.as_ref())?;
            Ok(status(report.pass))
        }
        Command::ListChecks => {
            let mut text = String::new();
            for k in CheckKind::ALL {
                let rows: Vec<&str> = k.rows().iter().map(|r| r.name).collect();
                text.push_str(&format!("{:<20} {}  [rows: {}]\n", k.name(), k.description(), rows.join(", ")));
            }
            write_stdout(&text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("warpcheck: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
