//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{self, Config};
use crate::report::{compare_table, summary, write_outputs};
use crate::runner::{execute, Outcome};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "pebo", version, about = "Run observer scenarios and check their invariants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Override the seed of the randomized check suites.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario, write CSV artifacts and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output` key, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run two scenarios and print their per-window error metrics side by side.
    Compare {
        /// Exactly two configs, given as `--config A --config B`.
        #[arg(long, num_args = 1, required = true)]
        config: Vec<PathBuf>,
        /// Optional directory receiving `compare.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the invariant suites only; no artifacts. Exits 1 if any check fails.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load(path: &Path) -> Result<Config, CliError> {
    config::load(path)
}

fn run_one(cfg: &Config, seed: Option<u64>, artifacts: bool) -> Result<Outcome, CliError> {
    execute(cfg, seed.unwrap_or(cfg.seed), artifacts)
}

/// Runs a parsed command and returns what should be printed on success.
pub fn dispatch(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Run { config, out, common } => {
            let cfg = load(config)?;
            let outcome = run_one(&cfg, common.seed, true)?;
            let dir = out
                .clone()
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            write_outputs(&outcome, &dir)?;
            Ok(summary(&outcome))
        }
        Command::Compare { config, out, common } => {
            if config.len() != 2 {
                return Err(CliError::Comparison(format!(
                    "compare takes exactly two configs, got {}",
                    config.len()
                )));
            }
            let a = load(&config[0])?;
            let b = load(&config[1])?;
            let seed = common.seed;
            let (ra, rb) = std::thread::scope(|s| {
                let ha = s.spawn(|| run_one(&a, seed, false));
                let hb = s.spawn(|| run_one(&b, seed, false));
                (ha.join().expect("run thread"), hb.join().expect("run thread"))
            });
            let (ra, rb) = (ra?, rb?);
            let table = compare_table(
                &ra,
                &rb,
                (&config[0].display().to_string(), &config[1].display().to_string()),
            )?;
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)
                    .and_then(|_| std::fs::write(dir.join("compare.txt"), &table))
                    .map_err(|e| CliError::Io {
                        path: dir.clone(),
                        source: e,
                    })?;
            }
            Ok(table)
        }
        Command::Check { config, common } => {
            let cfg = load(config)?;
            let outcome = run_one(&cfg, common.seed, false)?;
            let text = summary(&outcome);
            if outcome.all_passed() {
                Ok(text)
            } else {
                let failed: Vec<&str> = outcome
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name.as_str())
                    .collect();
                // the summary still goes to stdout so CI logs show every line
                print!("{text}");
                Err(CliError::ChecksFailed(failed.join(", ")))
            }
        }
    }
}

fn quiet(command: &Command) -> bool {
    match command {
        Command::Run { common, .. } | Command::Compare { common, .. } | Command::Check { common, .. } => {
            common.quiet
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(text) => {
            if !quiet(&cli.command) {
                print!("{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
