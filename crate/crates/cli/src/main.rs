use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ssbft_recycle::adversary::{InjectMode, Policy};
use ssbft_recycle::harness::{self, Config};
use ssbft_recycle::object::CoreKind;

#[derive(Parser)]
#[command(
    name = "ssbft-recycle",
    version,
    about = "Lock-step simulator for self-stabilizing consensus object recycling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble of seeded trials and write one CSV row per trial.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat JSON file with any of the options below; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    log_size: Option<usize>,
    #[arg(long)]
    index_num: Option<usize>,
    #[arg(long)]
    kappa: Option<u64>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(String))]
    adversary: Option<String>,
    #[arg(long)]
    inject: Option<String>,
    #[arg(long)]
    core: Option<String>,
    /// Largest delay-stub decision delay, in rounds.
    #[arg(long)]
    dmax: Option<u32>,
    /// Number of Byzantine nodes (defaults to t).
    #[arg(long)]
    byz: Option<usize>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a per-round trace next to the CSV.
    #[arg(long)]
    trace: bool,
    /// Exit nonzero when any post-stabilization violation is counted.
    #[arg(long)]
    strict: bool,
}

impl RunArgs {
    fn config(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(path) => Config::from_json_file(path)?,
            None => Config::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        set!(n, t, log_size, index_num, rounds, trials, seed, dmax);
        if self.kappa.is_some() {
            c.kappa = self.kappa;
        }
        if self.byz.is_some() {
            c.byz = self.byz;
        }
        if let Some(s) = &self.adversary {
            c.adversary = s.parse::<Policy>().map_err(anyhow::Error::msg)?;
        }
        if let Some(s) = &self.inject {
            c.inject = s.parse::<InjectMode>().map_err(anyhow::Error::msg)?;
        }
        if let Some(s) = &self.core {
            c.core = s.parse::<CoreKind>().map_err(anyhow::Error::msg)?;
        }
        Ok(c)
    }
}

fn run(args: &RunArgs) -> Result<bool> {
    let config = args.config()?;
    config.validate()?;
    for w in config.params(0).warnings() {
        eprintln!("warning: {w}");
    }
    let outputs = harness::run_ensemble(&config)?;
    let rows = harness::csv_rows(&config, &outputs);
    match &args.out {
        Some(path) => {
            harness::write_csv(path, &rows)?;
            if args.trace {
                let trace = harness::trace_path(path);
                harness::write_trace(&trace, &outputs)
                    .with_context(|| format!("writing trace {}", trace.display()))?;
            }
        }
        None => {
            print!("{}", harness::csv_string(&rows)?);
            if args.trace {
                eprintln!("warning: --trace needs --out; no trace written");
            }
        }
    }
    eprintln!("{}", harness::summary(&outputs));
    Ok(rows.iter().all(|r| r.total_violations == 0))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(clean) if clean || !args.strict => ExitCode::SUCCESS,
            Ok(_) => {
                eprintln!("error: post-stabilization violations present");
                ExitCode::from(1)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
