//! `panelcast`: synthesize or validate state-year panels, train the
//! forecasting network, and run the repeated-trial protocol.
//!
//! Exit codes: 0 success, 1 data-validation failure, 2 bad arguments or
//! config, 3 I/O failure. Progress goes to stderr; results go to files (and
//! `validate`'s report to stdout).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use panelcast::chart;
use panelcast::train::TrainConfig;

use commands::CliError;

/// State-year violent-crime forecasting: data synthesis, validation,
/// training, trials, and reports.
#[derive(Parser, Debug)]
#[command(name = "panelcast", version, about, propagate_version = true)]
struct Cli {
    /// JSON config file; command-line flags override file values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for artifacts [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed override: generator seed for synth, training seed for train,
    /// base seed for trials [default: 0]
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Worker threads for the trials command [default: 1]
    #[arg(long, global = true, value_name = "INT")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Training hyperparameter overrides; unset flags fall back to the config
/// file, then to the built-in defaults.
#[derive(Args, Debug, Clone, Copy, Default)]
struct TrainOverrides {
    /// Learning rate for Adam [default: 0.001]
    #[arg(long, value_name = "REAL")]
    learning_rate: Option<f64>,

    /// Maximum number of training epochs [default: 100]
    #[arg(long, value_name = "INT")]
    epochs: Option<usize>,

    /// Sequences per mini-batch [default: 64]
    #[arg(long, value_name = "INT")]
    batch_size: Option<usize>,

    /// Early-stopping patience in epochs [default: 10]
    #[arg(long, value_name = "INT")]
    es_patience: Option<usize>,

    /// Plateau epochs before the learning rate is reduced [default: 5]
    #[arg(long, value_name = "INT")]
    lr_patience: Option<usize>,

    /// Multiplier applied when reducing the learning rate [default: 0.5]
    #[arg(long, value_name = "REAL")]
    lr_factor: Option<f64>,

    /// Floor for the reduced learning rate [default: 0.000001]
    #[arg(long, value_name = "REAL")]
    min_lr: Option<f64>,
}

impl TrainOverrides {
    fn apply(&self, t: &mut TrainConfig) {
        if let Some(v) = self.learning_rate {
            t.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.es_patience {
            t.es_patience = v;
        }
        if let Some(v) = self.lr_patience {
            t.lr_patience = v;
        }
        if let Some(v) = self.lr_factor {
            t.lr_factor = v;
        }
        if let Some(v) = self.min_lr {
            t.min_lr = v;
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic state-year panel CSV
    Synth {
        /// Number of states, assigned the first N codes alphabetically
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..=50))]
        states: u64,

        /// First calendar year in the panel
        #[arg(long, default_value_t = 2000)]
        first_year: i32,

        /// Consecutive years per state
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        years: u64,

        /// Exact output file; otherwise <out dir>/<config data_path file name>
        #[arg(value_name = "FILE")]
        file: Option<PathBuf>,
    },

    /// Check a panel CSV against the schema rules and print the report
    Validate {
        /// Panel CSV to check; defaults to the config's data_path
        #[arg(value_name = "FILE")]
        file: Option<PathBuf>,
    },

    /// Train once; write checkpoint, training log, and test predictions
    Train {
        /// Also dump the scaled training sequences to sequences.csv
        #[arg(long)]
        dump_sequences: bool,

        #[command(flatten)]
        overrides: TrainOverrides,
    },

    /// Run repeated seeded trials and write the aggregate reports
    Trials {
        /// Number of trials, seeded base_seed.. [default: 50]
        #[arg(long, value_name = "INT")]
        trials: Option<usize>,

        /// Zero out wall/CPU times so outputs are byte-stable across runs
        #[arg(long)]
        zero_timing: bool,

        /// Error-bar chart width in pixels [default: 800]
        #[arg(long, value_name = "INT")]
        svg_width: Option<u32>,

        /// Error-bar chart height in pixels [default: 600]
        #[arg(long, value_name = "INT")]
        svg_height: Option<u32>,

        #[command(flatten)]
        overrides: TrainOverrides,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = commands::load_config(cli.config.as_deref())?;
    if let Some(out) = cli.out {
        config.out_dir = out;
    }

    match cli.command {
        Command::Synth {
            states,
            first_year,
            years,
            file,
        } => {
            let seed = cli.seed.unwrap_or(config.base_seed);
            commands::cmd_synth(
                &config,
                seed,
                states as usize,
                first_year,
                years as usize,
                file.as_deref(),
            )
        }
        Command::Validate { file } => {
            if let Some(f) = file {
                config.data_path = f;
            }
            commands::cmd_validate(&config)
        }
        Command::Train {
            dump_sequences,
            overrides,
        } => {
            overrides.apply(&mut config.train);
            if let Some(s) = cli.seed {
                config.train.seed = s;
            }
            commands::cmd_train(&config, dump_sequences).map(|_| ())
        }
        Command::Trials {
            trials,
            zero_timing,
            svg_width,
            svg_height,
            overrides,
        } => {
            overrides.apply(&mut config.train);
            if let Some(s) = cli.seed {
                config.base_seed = s;
            }
            if let Some(n) = trials {
                config.n_trials = n;
            }
            let jobs = cli.jobs.unwrap_or(1);
            let size = (
                svg_width.unwrap_or(chart::DEFAULT_WIDTH),
                svg_height.unwrap_or(chart::DEFAULT_HEIGHT),
            );
            commands::cmd_trials(&config, jobs, zero_timing, size).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
