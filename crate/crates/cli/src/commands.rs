//! Command bodies and the exit-code contract: 0 success, 1 data-validation
//! failure, 2 bad arguments or config, 3 I/O failure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use panelcast::eval::StatePrediction;
use panelcast::features::FeatureError;
use panelcast::net::checkpoint::{save_checkpoint, CheckpointError};
use panelcast::panel::{self, PanelDataset, PanelError};
use panelcast::train::{self, TrainError};
use panelcast::trials::{self, TrialRunner, TrialsError};

use crate::config::CliConfig;

#[derive(Debug)]
pub enum CliError {
    /// Exit 2: arguments or configuration are malformed.
    BadArgs(String),
    /// Exit 1: the data failed validation or the pipeline rejected it.
    DataInvalid(String),
    /// Exit 3: the filesystem said no.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::DataInvalid(_) => 1,
            CliError::BadArgs(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::BadArgs(m) | CliError::DataInvalid(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        match e {
            PanelError::Io { .. } => CliError::Io(e.to_string()),
            PanelError::InvalidArgument(_) => CliError::BadArgs(e.to_string()),
            _ => CliError::DataInvalid(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::DataInvalid(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) => CliError::BadArgs(e.to_string()),
            TrainError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::DataInvalid(e.to_string()),
        }
    }
}

impl From<TrialsError> for CliError {
    fn from(e: TrialsError) -> Self {
        match e {
            TrialsError::ZeroTrials => CliError::BadArgs(e.to_string()),
            TrialsError::Io { .. } => CliError::Io(e.to_string()),
            TrialsError::Features(inner) => inner.into(),
            TrialsError::Train { ref source, .. } => match source {
                TrainError::InvalidConfig(_) => CliError::BadArgs(e.to_string()),
                TrainError::Io { .. } => CliError::Io(e.to_string()),
                _ => CliError::DataInvalid(e.to_string()),
            },
            _ => CliError::DataInvalid(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::DataInvalid(e.to_string()),
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<CliConfig, CliError> {
    let config = match path {
        None => CliConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("could not read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::BadArgs(format!("config {}: {e}", p.display())))?
        }
    };
    Ok(config)
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("could not create {}: {e}", dir.display())))
}

fn check_writable(dir: &Path) -> Result<(), CliError> {
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"")
        .map_err(|e| CliError::Io(format!("out dir {} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(&probe);
    Ok(())
}

/// Generates a synthetic panel. With `explicit_file` the CSV goes exactly
/// there; otherwise it lands in the output directory under the config's
/// data_path file name.
pub fn cmd_synth(
    config: &CliConfig,
    seed: u64,
    n_states: usize,
    first_year: i32,
    n_years: usize,
    explicit_file: Option<&Path>,
) -> Result<(), CliError> {
    let dataset = panel::synthesize_panel(seed, n_states, first_year, n_years)?;
    let path = match explicit_file {
        Some(f) => {
            if let Some(parent) = f.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_out_dir(parent)?;
            }
            f.to_path_buf()
        }
        None => {
            ensure_out_dir(&config.out_dir)?;
            config.out_dir.join(
                config
                    .data_path
                    .file_name()
                    .ok_or_else(|| CliError::BadArgs("data_path has no file name".into()))?,
            )
        }
    };
    panel::write_panel(&dataset, &path)?;
    eprintln!(
        "wrote {} states x {} years ({} rows) to {}",
        n_states,
        n_years,
        n_states * n_years,
        path.display()
    );
    Ok(())
}

/// Loads a panel and prints its validation report: an error count followed
/// by one line per violation.
pub fn cmd_validate(config: &CliConfig) -> Result<(), CliError> {
    let dataset = panel::load_panel(&config.data_path)?;
    let report = panel::validate(&dataset);
    println!("{} errors", report.errors.len());
    for issue in &report.errors {
        println!("{issue}");
    }
    if report.is_valid {
        Ok(())
    } else {
        Err(CliError::DataInvalid(format!(
            "{}: {} validation errors",
            config.data_path.display(),
            report.errors.len()
        )))
    }
}

fn prepare_runner(config: &CliConfig) -> Result<(PanelDataset, TrialRunner), CliError> {
    let dataset = panel::load_panel(&config.data_path)?;
    let report = panel::validate(&dataset);
    if !report.is_valid {
        return Err(CliError::DataInvalid(format!(
            "{}: {} validation errors (run `panelcast validate` to list them)",
            config.data_path.display(),
            report.errors.len()
        )));
    }
    let runner = TrialRunner::new(
        &dataset,
        config.lag,
        config.rolling_mean_window,
        config.rolling_std_window,
    )?;
    Ok((dataset, runner))
}

fn write_predictions_csv(path: &Path, predictions: &[StatePrediction]) -> Result<(), CliError> {
    let mut s = String::from("state,year,actual,predicted\n");
    for p in predictions {
        s.push_str(&format!(
            "{},{},{},{}\n",
            p.state, p.year, p.actual, p.predicted
        ));
    }
    fs::write(path, s).map_err(|e| CliError::Io(format!("could not write {}: {e}", path.display())))
}

pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub train_log: PathBuf,
    pub predictions: PathBuf,
}

/// Full single-run pipeline: ingest, features, split, scale, train; writes
/// the parameter checkpoint, the per-epoch training log, and the held-out
/// year's predictions.
pub fn cmd_train(config: &CliConfig, dump_sequences: bool) -> Result<TrainArtifacts, CliError> {
    config.validate().map_err(CliError::BadArgs)?;
    let (_, runner) = prepare_runner(config)?;
    ensure_out_dir(&config.out_dir)?;

    eprintln!(
        "training: {} train / {} validation / {} test sequences, seed {}",
        runner.split.train.len(),
        runner.split.validation.len(),
        runner.split.test.len(),
        config.train.seed
    );
    let (params, log) = train::train_model(&runner.split, &config.train)?;
    eprintln!(
        "stopped after epoch {} (best validation at epoch {})",
        log.stopped_epoch, log.best_epoch
    );

    let artifacts = TrainArtifacts {
        checkpoint: config.out_dir.join("model.ckpt"),
        train_log: config.out_dir.join("train_log.csv"),
        predictions: config.out_dir.join("test_predictions.csv"),
    };
    save_checkpoint(&params, config.train.seed, &artifacts.checkpoint)?;
    log.write_csv(&artifacts.train_log)?;
    write_predictions_csv(&artifacts.predictions, &runner.predictions_for(&params))?;
    if dump_sequences {
        let path = config.out_dir.join("sequences.csv");
        panelcast::features::write_sequences_csv(&runner.split.train, &path)?;
        eprintln!("dumped scaled training sequences to {}", path.display());
    }
    eprintln!("artifacts in {}", config.out_dir.display());
    Ok(artifacts)
}

pub struct TrialsArtifacts {
    pub trials_csv: PathBuf,
    pub per_state_csv: PathBuf,
    pub report_json: PathBuf,
    pub svg: PathBuf,
}

/// The repeated-trial protocol: n_trials seeded runs, aggregation, and the
/// four report artifacts.
pub fn cmd_trials(
    config: &CliConfig,
    jobs: usize,
    zero_timing: bool,
    svg_size: (u32, u32),
) -> Result<TrialsArtifacts, CliError> {
    config.validate().map_err(CliError::BadArgs)?;
    let (_, runner) = prepare_runner(config)?;
    ensure_out_dir(&config.out_dir)?;
    check_writable(&config.out_dir)?;

    eprintln!(
        "running {} trials with seeds {}..{} ({} worker{})",
        config.n_trials,
        config.base_seed,
        config.base_seed + config.n_trials as u64 - 1,
        jobs,
        if jobs == 1 { "" } else { "s" }
    );
    let (mut trial_metrics, predictions) =
        runner.run_many(&config.train, config.n_trials, config.base_seed, jobs)?;
    if zero_timing {
        trials::zero_timing(&mut trial_metrics);
    }
    for t in &trial_metrics {
        eprintln!(
            "trial {}: seed {} total_loss {:.1} test_mse {:.1} stopped_epoch {}",
            t.trial_id, t.seed, t.total_loss, t.test_mse, t.stopped_epoch
        );
    }
    let report = panelcast::eval::aggregate_trials(&trial_metrics)
        .map_err(|e| CliError::DataInvalid(e.to_string()))?;

    let artifacts = TrialsArtifacts {
        trials_csv: config.out_dir.join("trials.csv"),
        per_state_csv: config.out_dir.join("per_state.csv"),
        report_json: config.out_dir.join("report.json"),
        svg: config.out_dir.join("error_bars.svg"),
    };
    trials::write_trials_csv(&artifacts.trials_csv, &trial_metrics)?;
    trials::write_per_state_csv(&artifacts.per_state_csv, &report, runner.test_targets())?;
    trials::write_report_json(&artifacts.report_json, &report)?;
    trials::write_error_bars_svg(
        &artifacts.svg,
        &report,
        &predictions,
        svg_size.0,
        svg_size.1,
    )?;
    eprintln!("reports in {}", config.out_dir.display());
    Ok(artifacts)
}
