//! Command-line driver: analyze a device description or a built-in device and emit a
//! verdict report, or export a built-in device as a description file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use heralds_core::analysis::{analyze, AnalysisOptions, DEFAULT_TOL};
use heralds_core::catalog::Builtin;
use heralds_core::device_file::{export_device, parse_device};
use heralds_core::lift::DEFAULT_PHOTON_CAP;
use heralds_core::report::ReportFile;
use heralds_core::{ConditionalDevice, Error};

/// Exit status for parse, validation and runtime errors.
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "heralds",
    version,
    about = "Operational-unitarity analysis of heralded linear-optical devices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a device; exits 0 if operationally unitary, 2 if not, 1 on error.
    Analyze(AnalyzeArgs),
    /// Write a built-in device as a description file.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Device description file (JSON).
    #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
    pub device: Option<PathBuf>,
    /// Analyze a built-in device: klm-ns, klm-ns-extended or cnot-pittman.
    #[arg(long, value_parser = parse_builtin)]
    pub builtin: Option<Builtin>,
    /// Numerical tolerance for every verdict test.
    #[arg(long, default_value_t = DEFAULT_TOL, allow_negative_numbers = true)]
    pub tol: f64,
    /// Operation time used for H_eff = Q / t_eff.
    #[arg(long = "t-eff", default_value_t = 1.0, allow_negative_numbers = true)]
    pub t_eff: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Largest photon number any lifted state may reach.
    #[arg(long = "photon-cap", default_value_t = DEFAULT_PHOTON_CAP)]
    pub photon_cap: u32,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_parser = parse_builtin)]
    pub builtin: Builtin,
    /// Output path; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_builtin(s: &str) -> Result<Builtin, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `contents` to a temporary file next to `path` and rename it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(contents.as_bytes()).map_err(io_err(path))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o644)).map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load(args: &AnalyzeArgs) -> Result<(String, ConditionalDevice), CliError> {
    match (&args.builtin, &args.device) {
        (Some(b), _) => Ok((b.name().to_string(), b.build())),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            Ok((path.display().to_string(), parse_device(&text)?))
        }
        (None, None) => Err(CliError::Usage("give a device file or --builtin".into())),
    }
}

pub fn run_analysis(args: &AnalyzeArgs) -> Result<i32, CliError> {
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", args.tol)));
    }
    if !(args.t_eff > 0.0 && args.t_eff.is_finite()) {
        return Err(CliError::Usage(format!("--t-eff must be positive, got {}", args.t_eff)));
    }
    let (name, dev) = load(args)?;
    let dev = dev.with_photon_cap(args.photon_cap);
    let analysis = analyze(
        &dev,
        AnalysisOptions {
            tol: args.tol,
            t_eff: args.t_eff,
        },
    )?;
    let report = ReportFile::new(name, args.photon_cap, &analysis);
    let rendered = match args.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json(),
    };
    emit(args.out.as_deref(), &rendered)?;
    Ok(report.exit_code())
}

pub fn run_export(args: &ExportArgs) -> Result<i32, CliError> {
    emit(args.out.as_deref(), &export_device(&args.builtin.build()))?;
    Ok(0)
}

/// Run a parsed command line, mapping every error to [`EXIT_ERROR`].
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Analyze(a) => run_analysis(a),
        Command::Export(e) => run_export(e),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}
