//! Command-line front end: `run`, `ablate`, `sweep`, `verify`, `plot` and
//! `gen-data`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or config error,
//! 3 runtime error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use log::LevelFilter;

use crate::error::{Error, Result};
use crate::harness::{
    ablate, aggregate_seeds, run_experiment, sweep, write_new, ExperimentConfig, Generator, RunResult, Summary,
};
use crate::oracle::{verify_suite, Solver, VerifyOptions, VerifyReport};
use crate::plan::solve_epsilon;
use crate::plot::write_plots;
use crate::tasks::export_csv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "plan",
    version,
    about = "Continual learning with proactive low-rank allocation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, env = "PLAN_OUT", default_value = "results")]
    pub out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for multi-run commands.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one method over all configured seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare plan, inc_lora and the two ablations on one stream.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep the axis named in the config's [sweep] section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check the closed-form solver, gradients and allocation invariants.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Draw running Acc / AAA charts from result files.
    Plot {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the configured task stream as CSV plus a config that loads it.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Run { common, .. }
            | Command::Ablate { common, .. }
            | Command::Sweep { common, .. }
            | Command::Verify { common }
            | Command::Plot { common, .. }
            | Command::GenData { common, .. } => common,
        }
    }
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Verify(Vec<String>),
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e)
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Verify(_) => EXIT_VERIFY,
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

/// Unreadable input files count as usage errors.
fn input_failure(e: Error) -> Failure {
    match e {
        Error::Io { .. } => Failure::Usage(e.to_string()),
        other => other.into(),
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> std::result::Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(input_failure)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

fn print_summary(s: &Summary) {
    println!(
        "{}: Acc {}  AAA {}  (n={}{})",
        s.label,
        Summary::fmt_pct(s.acc_mean, s.acc_std),
        Summary::fmt_pct(s.aaa_mean, s.aaa_std),
        s.n,
        if s.single_sample { ", std not estimated" } else { "" }
    );
}

fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let stream = cfg.build_stream()?;
    let hash = stream.content_hash();
    let mut prefix = format!("stream-{}", &hash[..12]);
    let mut n = 0;
    while out.join(format!("{prefix}_train.csv")).exists() {
        n += 1;
        prefix = format!("stream-{}-{n}", &hash[..12]);
    }
    let (train, mut schema) = export_csv(&stream, out, &prefix)?;
    let file_name = |p: &Path| PathBuf::from(p.file_name().expect("exported file"));
    let mut files = vec![train.clone()];
    files.extend(schema.test_path.clone());
    files.extend(schema.base_path.clone());
    schema.test_path = schema.test_path.as_deref().map(file_name);
    schema.base_path = schema.base_path.as_deref().map(file_name);
    let mut loader = cfg.clone();
    loader.tasks.generator = Generator::Csv;
    loader.tasks.csv_path = Some(file_name(&train));
    loader.tasks.csv = Some(schema);
    loader.sweep = None;
    files.push(write_new(out, &prefix, "toml", &loader.to_toml_string())?);
    Ok(files)
}

/// Runs the verification suite against `solver`, prints one line per check
/// and writes `verify.json` into `out`.
pub fn verify(solver: &Solver, opts: &VerifyOptions, out: &Path) -> std::result::Result<VerifyReport, Failure> {
    let report = verify_suite(solver, opts)?;
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n";
    let path = write_new(out, "verify", "json", &json)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {}", path.display());
    if !report.passed {
        return Err(Failure::Verify(
            report.failures().into_iter().map(String::from).collect(),
        ));
    }
    Ok(report)
}

/// Executes a parsed command.
pub fn execute(cli: &Cli) -> std::result::Result<(), Failure> {
    let common = cli.command.common();
    let out = &common.out;
    match &cli.command {
        Command::Run { config, .. } => {
            let cfg = load_config(config, common.seed)?;
            let res = run_experiment(&cfg, out, common.jobs)?;
            print_summary(&aggregate_seeds(&res.results)?);
            for f in &res.result_files {
                println!("wrote {}", f.display());
            }
            println!("wrote {}", res.runs_csv.display());
        }
        Command::Ablate { config, .. } | Command::Sweep { config, .. } => {
            let cfg = load_config(config, common.seed)?;
            let res = if matches!(cli.command, Command::Ablate { .. }) {
                ablate(&cfg, out, common.jobs)?
            } else {
                sweep(&cfg, out, common.jobs)?
            };
            print!("{}", res.report.to_table());
            if let Some(first) = res.report.rows.first() {
                println!("stream {}", first.summary.stream_hash);
            }
            println!("wrote {}", res.summary_csv.display());
            println!("wrote {}", res.report_json.display());
        }
        Command::Verify { .. } => {
            let opts = VerifyOptions {
                seed: common.seed.unwrap_or(0),
                ..VerifyOptions::default()
            };
            verify(&solve_epsilon, &opts, out)?;
        }
        Command::Plot { results, .. } => {
            let loaded = results
                .iter()
                .map(|p| RunResult::load(p))
                .collect::<Result<Vec<_>>>()
                .map_err(input_failure)?;
            let res = write_plots(&loaded, out)?;
            for f in res.svgs.iter().chain([&res.csv]) {
                println!("wrote {}", f.display());
            }
        }
        Command::GenData { config, .. } => {
            let cfg = load_config(config, common.seed)?;
            for f in gen_data(&cfg, out)? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.command.common().verbose);
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Verify(names) => eprintln!("verification failed: {}", names.join(", ")),
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Runtime(e) => eprintln!("error: {e}"),
            }
            f.exit_code()
        }
    }
}
