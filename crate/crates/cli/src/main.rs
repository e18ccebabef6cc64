use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use quasiradial::density::{synthesize_symbol, SynthesisParams, MAX_SYNTHESIS_ARITY};
use quasiradial::quad::{Mode, DEFAULT_ORDER};
use quasiradial::spectrum::{eigen_table_with, DEFAULT_CELL_CAP};
use quasiradial::verify::{run, Suite, VerifyConfig};
use quasiradial::{parse_lattice, parse_symbol, LatticeFunction, Partition, QuasiRadialSymbol, Window};

const EXIT_ASSERTION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_TARGET_MISSED: u8 = 4;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Resource(String),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<quasiradial::Error> for CliError {
    fn from(e: quasiradial::Error) -> Self {
        match e {
            quasiradial::Error::Resource(_) => CliError::Resource(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Resource(_) => EXIT_RESOURCE,
        }
    }
}

#[derive(Parser)]
#[command(name = "quasiradial", version, about = "Eigenvalue functions of Toeplitz operators with quasi-radial symbols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Gauss–Laguerre order.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    /// Monte Carlo samples.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Quadrature mode: auto, smooth or adaptive.
    #[arg(long, default_value = "auto")]
    mode: String,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn mode(&self) -> Result<Mode, CliError> {
        Ok(self.mode.parse()?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue table of a symbol on a window, as CSV.
    Spectrum {
        #[arg(long)]
        symbol: PathBuf,
        /// Block sizes `n_1,...,n_k`.
        #[arg(long, value_delimiter = ',', required = true)]
        partition: Vec<usize>,
        /// Window bounds `M_1,...,M_k`.
        #[arg(long, value_delimiter = ',', required = true)]
        window: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite and write its JSON report.
    Verify {
        /// schur, lipschitz, shifts, extension, density, obstruction or all.
        suite: String,
        #[arg(long)]
        symbol: Option<PathBuf>,
        #[arg(long)]
        lattice: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        partition: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
    /// Build a symbol whose eigenvalue function approximates a lattice target.
    Synthesize {
        #[arg(long, alias = "lattice")]
        target: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Defaults to 400 per axis at arity 1 and 30 at arity 2.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        partition: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0.5)]
        t0: f64,
        /// Where the synthesis report goes; standard error when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_symbol(path: &Path) -> Result<QuasiRadialSymbol, CliError> {
    Ok(parse_symbol(&read(path)?)?)
}

fn load_lattice(path: &Path) -> Result<LatticeFunction, CliError> {
    Ok(parse_lattice(&read(path)?)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })
        }
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn spectrum(symbol: &Path, partition: Vec<usize>, window: Vec<usize>, common: &Common) -> Result<u8, CliError> {
    let n = Partition::new(partition)?;
    let a = load_symbol(symbol)?.lift(n.k())?;
    let w = Window::new(window)?;
    let table = eigen_table_with(&a, &n, &w, common.order, common.mode()?, DEFAULT_CELL_CAP)?;
    emit(common.out.as_deref(), &table.to_csv())?;
    Ok(0)
}

fn verify(
    suite: &str,
    symbol: Option<&Path>,
    lattice: Option<&Path>,
    partition: Option<Vec<usize>>,
    common: &Common,
) -> Result<u8, CliError> {
    let suite: Suite = suite.parse()?;
    let cfg = VerifyConfig {
        seed: common.seed,
        samples: common.samples,
        order: common.order,
        mode: common.mode()?,
        partition: partition.map(Partition::new).transpose()?,
        symbol: symbol.map(load_symbol).transpose()?,
        lattice: lattice.map(load_lattice).transpose()?,
    };
    let report = run(suite, &cfg)?;
    emit(common.out.as_deref(), &with_newline(report.to_json()))?;
    Ok(if report.passed { 0 } else { EXIT_ASSERTION })
}

#[allow(clippy::too_many_arguments)]
fn synthesize(
    target: &Path,
    epsilon: f64,
    window: Option<Vec<usize>>,
    partition: Option<Vec<usize>>,
    t0: f64,
    report_path: Option<&Path>,
    common: &Common,
) -> Result<u8, CliError> {
    let sigma = load_lattice(target)?;
    let k = sigma.arity();
    if k > MAX_SYNTHESIS_ARITY {
        return Err(CliError::Config(format!("synthesis supports arity up to {MAX_SYNTHESIS_ARITY}, target has {k}")));
    }
    let window = Window::new(window.unwrap_or_else(|| vec![if k == 1 { 400 } else { 30 }; k]))?;
    let n = match partition {
        Some(p) => Partition::new(p)?,
        None => Partition::ones(k),
    };
    let params = SynthesisParams { t0, order: common.order, mode: common.mode()?, ..SynthesisParams::default() };
    let (symbol, report) = synthesize_symbol(&sigma, &n, epsilon, &window, &params)?;
    emit(common.out.as_deref(), &with_newline(symbol.to_json()))?;
    let report_json = with_newline(serde_json::to_string_pretty(&report).expect("report serializes"));
    match report_path {
        Some(p) => fs::write(p, report_json).map_err(|source| CliError::Io { path: p.to_path_buf(), source })?,
        None => eprint!("{report_json}"),
    }
    Ok(if report.target_missed() { EXIT_TARGET_MISSED } else { 0 })
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("WORKERS") else {
        return Ok(());
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| CliError::Config(format!("WORKERS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Resource(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers().and_then(|()| match &cli.command {
        Command::Spectrum { symbol, partition, window, common } => {
            spectrum(symbol, partition.clone(), window.clone(), common)
        }
        Command::Verify { suite, symbol, lattice, partition, common } => {
            verify(suite, symbol.as_deref(), lattice.as_deref(), partition.clone(), common)
        }
        Command::Synthesize { target, epsilon, window, partition, t0, report, common } => {
            synthesize(target, *epsilon, window.clone(), partition.clone(), *t0, report.as_deref(), common)
        }
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
