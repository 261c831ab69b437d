//! Argument parsing, settings resolution and exit-code mapping.

mod commands;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use specbench::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "specbench",
    version,
    about = "Spectral library search and identification benchmarks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Worker threads [env: SPECBENCH_THREADS]
    #[arg(long, global = true, env = "SPECBENCH_THREADS", value_parser = clap::value_parser!(u32).range(1..), hide_env = true)]
    pub threads: Option<u32>,
    /// error, warn, info, debug or trace [env: SPECBENCH_LOG]
    #[arg(long, global = true, env = "SPECBENCH_LOG", hide_env = true)]
    pub log_level: Option<log::LevelFilter>,
    /// Directory receiving every file a command writes
    #[arg(long, global = true, env = "SPECBENCH_OUT_DIR", hide_env = true)]
    pub out_dir: Option<PathBuf>,
    /// Format of results printed to stdout
    #[arg(long, global = true, env = "SPECBENCH_FORMAT", hide_env = true)]
    pub format: Option<Format>,
    /// JSON configuration file
    #[arg(long, global = true, env = "SPECBENCH_CONFIG", hide_env = true)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Curate a raw manifest into a reference library
    BuildIndex(commands::BuildIndexArgs),
    /// Search query spectra against a library
    Search(commands::SearchArgs),
    /// Run a benchmark spec and write its result directory
    Benchmark(commands::BenchmarkArgs),
    /// Structural distance between molecules
    Mces(commands::McesArgs),
    /// ROC curve and AUC from labeled scores or search results
    Roc(commands::RocArgs),
    /// Per-dilution identification statistics with Welch comparisons
    DilutionReport(commands::DilutionArgs),
    /// Sample-level embedding aggregation, PCA and classification
    Biointerp(commands::BiointerpArgs),
    /// Generate a synthetic fixture and a matching benchmark spec
    Fixture(commands::FixtureArgs),
}

/// Search defaults a config file may set.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchDefaults {
    pub ppm: Option<f64>,
    pub k: Option<usize>,
    pub min_matched: Option<usize>,
    pub fragment_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    threads: Option<u32>,
    log_level: Option<String>,
    out_dir: Option<PathBuf>,
    format: Option<Format>,
    #[serde(default)]
    search: SearchDefaults,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub threads: usize,
    pub log_level: log::LevelFilter,
    pub out_dir: PathBuf,
    pub format: Format,
    pub search: SearchDefaults,
}

pub const DEFAULT_OUT_DIR: &str = "specbench-out";

impl Settings {
    /// Flags and environment (already merged by clap) win over the config
    /// file, which wins over built-in defaults.
    pub fn resolve(g: &GlobalArgs) -> Result<Self, Error> {
        let file: ConfigFile = match &g.config {
            Some(p) => serde_json::from_slice(&specbench::io::read_bytes(p)?)?,
            None => ConfigFile::default(),
        };
        let threads = g.threads.or(file.threads).map(|t| t as usize);
        if threads == Some(0) {
            return Err(Error::InvalidInput("threads must be at least 1".into()));
        }
        let file_level = match file.log_level.as_deref() {
            Some(s) => Some(
                s.parse::<log::LevelFilter>()
                    .map_err(|_| Error::InvalidInput(format!("unknown log level {s:?}")))?,
            ),
            None => None,
        };
        Ok(Settings {
            threads: threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            log_level: g.log_level.or(file_level).unwrap_or(log::LevelFilter::Warn),
            out_dir: g
                .out_dir
                .clone()
                .or(file.out_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            format: g.format.or(file.format).unwrap_or(Format::Csv),
            search: file.search,
        })
    }
}

fn diagnostic(kind: &str, message: &str) {
    let line = serde_json::json!({ "level": "error", "kind": kind, "message": message });
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn init_logging(level: log::LevelFilter) {
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str().to_ascii_lowercase(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    EXIT_USAGE
                }
                _ => {
                    diagnostic("usage", e.render().to_string().trim());
                    EXIT_USAGE
                }
            };
        }
    };
    let settings = match Settings::resolve(&cli.global) {
        Ok(s) => s,
        Err(e) => {
            diagnostic(e.kind(), &e.to_string());
            return if matches!(e, Error::InvalidInput(_)) {
                EXIT_USAGE
            } else {
                EXIT_DATA
            };
        }
    };
    init_logging(settings.log_level);
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            diagnostic("threads", &e.to_string());
            return EXIT_DATA;
        }
    };
    match pool.install(|| commands::dispatch(cli.command, &settings)) {
        Ok(()) => EXIT_OK,
        Err(commands::Failure::Usage(msg)) => {
            diagnostic("usage", &msg);
            EXIT_USAGE
        }
        Err(commands::Failure::Data(e)) => {
            diagnostic(e.kind(), &e.to_string());
            EXIT_DATA
        }
    }
}
