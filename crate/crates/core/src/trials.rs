//! Repeated-trial protocol: the feature pipeline is prepared once, then one
//! model is trained per seed and scored on the held-out year. Also writes
//! the tabular and chart outputs.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use thiserror::Error;

use crate::chart;
use crate::eval::{self, AggregateReport, EvalError, StateError, StatePrediction, TrialMetrics};
use crate::features::{self, FeatureError, Scaler, SplitDataset};
use crate::net::NetworkParams;
use crate::panel::PanelDataset;
use crate::train::{self, TrainConfig, TrainError};

pub const DEFAULT_LAG: usize = 5;
pub const DEFAULT_MEAN_WINDOW: usize = 3;
pub const DEFAULT_STD_WINDOW: usize = 4;

#[derive(Debug, Error)]
pub enum TrialsError {
    #[error("n_trials must be at least 1")]
    ZeroTrials,
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("trial {trial_id}: {source}")]
    Train { trial_id: usize, source: TrainError },
    #[error("trial {trial_id}: {source}")]
    Metrics { trial_id: usize, source: EvalError },
    #[error("aggregation: {0}")]
    Aggregate(EvalError),
    #[error("could not write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One held-out target: the state, the forecast year, and the observed
/// violent-crime count in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct TestTarget {
    pub state: String,
    pub year: i32,
    pub actual: f64,
}

/// Feature pipeline prepared once and reused across trials: the scaled
/// train/validation/test split, the scaler fitted on the training years,
/// and the unscaled test targets in state order.
pub struct TrialRunner {
    pub split: SplitDataset,
    pub scaler: Scaler,
    test_meta: Vec<TestTarget>,
}

/// User+system CPU time consumed so far by the calling thread. In the
/// sequential default every trial runs on the one process thread, so this
/// matches process CPU time; under parallel execution it keeps per-trial
/// measurements from counting sibling trials' work.
fn thread_cpu_time_s() -> f64 {
    let mut ru: libc::rusage = unsafe { std::mem::zeroed() };
    let rc = unsafe { libc::getrusage(libc::RUSAGE_THREAD, &mut ru) };
    assert_eq!(rc, 0, "getrusage(RUSAGE_THREAD) failed");
    let tv = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 * 1e-6;
    tv(ru.ru_utime) + tv(ru.ru_stime)
}

impl TrialRunner {
    pub fn new(
        dataset: &PanelDataset,
        lag: usize,
        mean_window: usize,
        std_window: usize,
    ) -> Result<Self, TrialsError> {
        let sequences = features::build_sequences(dataset, lag, mean_window, std_window)?;
        let split = features::time_series_split(sequences)?;
        let scaler = features::fit_scaler(&split.train)?;
        let test_meta = split
            .test
            .iter()
            .map(|s| TestTarget {
                state: s.state.clone(),
                year: s.target_year,
                actual: s.target,
            })
            .collect();
        let split = SplitDataset {
            train: scaler.apply(&split.train),
            validation: scaler.apply(&split.validation),
            test: scaler.apply(&split.test),
        };
        Ok(Self {
            split,
            scaler,
            test_meta,
        })
    }

    /// The held-out targets, one per state, in state order.
    pub fn test_targets(&self) -> &[TestTarget] {
        &self.test_meta
    }

    /// Runs trained parameters over the test set and converts the outputs
    /// back to original violent-crime units.
    pub fn predictions_for(&self, params: &NetworkParams) -> Vec<StatePrediction> {
        let scaled = train::predict(params, &self.split.test);
        self.test_meta
            .iter()
            .zip(scaled)
            .map(|(t, s)| StatePrediction {
                state: t.state.clone(),
                year: t.year,
                predicted: self.scaler.unscale_target(s),
                actual: t.actual,
            })
            .collect()
    }

    /// Trains one model with the trial's seed and scores it: absolute and
    /// squared losses, signed per-state errors, wall and CPU time, and the
    /// epoch training stopped at.
    pub fn run_trial(
        &self,
        trial_id: usize,
        seed: u64,
        config: &TrainConfig,
    ) -> Result<(TrialMetrics, Vec<StatePrediction>), TrialsError> {
        let wall_start = Instant::now();
        let cpu_start = thread_cpu_time_s();

        let cfg = TrainConfig { seed, ..*config };
        let (params, log) = train::train_model(&self.split, &cfg)
            .map_err(|source| TrialsError::Train { trial_id, source })?;
        let predictions = self.predictions_for(&params);

        let metrics_err = |source| TrialsError::Metrics { trial_id, source };
        let per_state = predictions
            .iter()
            .map(|p| {
                Ok(StateError {
                    state: p.state.clone(),
                    signed_diff: p.predicted - p.actual,
                    percent_error: eval::percent_error(p.predicted, p.actual)
                        .map_err(metrics_err)?,
                })
            })
            .collect::<Result<Vec<_>, TrialsError>>()?;

        let metrics = TrialMetrics {
            trial_id,
            seed,
            total_loss: eval::total_loss(&predictions).map_err(metrics_err)?,
            test_mse: eval::test_mse(&predictions).map_err(metrics_err)?,
            per_state,
            wall_time_s: wall_start.elapsed().as_secs_f64(),
            cpu_time_s: thread_cpu_time_s() - cpu_start,
            stopped_epoch: log.stopped_epoch,
        };
        Ok((metrics, predictions))
    }

    /// Runs `n_trials` trials with seeds `base_seed..base_seed+n_trials`,
    /// optionally across `jobs` worker threads. Results come back in
    /// trial-id order either way, along with trial 0's prediction list
    /// (actual values are identical across trials). On failure the error
    /// from the lowest-numbered failing trial is returned.
    pub fn run_many(
        &self,
        config: &TrainConfig,
        n_trials: usize,
        base_seed: u64,
        jobs: usize,
    ) -> Result<(Vec<TrialMetrics>, Vec<StatePrediction>), TrialsError> {
        if n_trials == 0 {
            return Err(TrialsError::ZeroTrials);
        }
        let jobs = jobs.clamp(1, n_trials);

        if jobs == 1 {
            let mut trials = Vec::with_capacity(n_trials);
            let mut predictions = Vec::new();
            for i in 0..n_trials {
                let (m, preds) = self.run_trial(i, base_seed + i as u64, config)?;
                if i == 0 {
                    predictions = preds;
                }
                trials.push(m);
            }
            return Ok((trials, predictions));
        }

        let next = AtomicUsize::new(0);
        let worker_outputs = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|_| {
                    let next = &next;
                    scope.spawn(move || {
                        let mut out = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= n_trials {
                                break;
                            }
                            out.push((i, self.run_trial(i, base_seed + i as u64, config)));
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("trial worker panicked"))
                .collect::<Vec<_>>()
        });

        let mut slots: Vec<Option<(TrialMetrics, Vec<StatePrediction>)>> =
            (0..n_trials).map(|_| None).collect();
        let mut first_err: Option<(usize, TrialsError)> = None;
        for (i, result) in worker_outputs.into_iter().flatten() {
            match result {
                Ok(pair) => slots[i] = Some(pair),
                Err(e) => {
                    if first_err.as_ref().is_none_or(|(j, _)| i < *j) {
                        first_err = Some((i, e));
                    }
                }
            }
        }
        if let Some((_, e)) = first_err {
            return Err(e);
        }

        let mut trials = Vec::with_capacity(n_trials);
        let mut predictions = Vec::new();
        for (i, slot) in slots.into_iter().enumerate() {
            let (m, preds) = slot.expect("every trial produced a result");
            if i == 0 {
                predictions = preds;
            }
            trials.push(m);
        }
        Ok((trials, predictions))
    }
}

/// Full protocol with default feature settings: trial i uses seed
/// base_seed+i; scaling is fitted once (the data never changes between
/// trials), while initialization, shuffling, and dropout vary with the seed.
pub fn run_trials(
    dataset: &PanelDataset,
    config: &TrainConfig,
    n_trials: usize,
    base_seed: u64,
) -> Result<(Vec<TrialMetrics>, AggregateReport), TrialsError> {
    run_trials_parallel(dataset, config, n_trials, base_seed, 1)
}

/// [`run_trials`] with an explicit worker-thread count.
pub fn run_trials_parallel(
    dataset: &PanelDataset,
    config: &TrainConfig,
    n_trials: usize,
    base_seed: u64,
    jobs: usize,
) -> Result<(Vec<TrialMetrics>, AggregateReport), TrialsError> {
    let runner = TrialRunner::new(
        dataset,
        DEFAULT_LAG,
        DEFAULT_MEAN_WINDOW,
        DEFAULT_STD_WINDOW,
    )?;
    let (trials, _) = runner.run_many(config, n_trials, base_seed, jobs)?;
    let report = eval::aggregate_trials(&trials).map_err(TrialsError::Aggregate)?;
    Ok((trials, report))
}

/// Clears wall and CPU times so that otherwise-deterministic outputs become
/// byte-identical across runs.
pub fn zero_timing(trials: &mut [TrialMetrics]) {
    for t in trials {
        t.wall_time_s = 0.0;
        t.cpu_time_s = 0.0;
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), TrialsError> {
    std::fs::write(path, contents).map_err(|source| TrialsError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One row per trial under the header
/// `trial_id,seed,total_loss,test_mse,wall_time_s,cpu_time_s,stopped_epoch`.
pub fn write_trials_csv(path: &Path, trials: &[TrialMetrics]) -> Result<(), TrialsError> {
    let mut s =
        String::from("trial_id,seed,total_loss,test_mse,wall_time_s,cpu_time_s,stopped_epoch\n");
    for t in trials {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.trial_id,
            t.seed,
            t.total_loss,
            t.test_mse,
            t.wall_time_s,
            t.cpu_time_s,
            t.stopped_epoch
        ));
    }
    write_file(path, &s)
}

/// One row per state under the header `state,actual,mean_predicted,adl,ape`,
/// where mean_predicted = actual + ADL.
pub fn write_per_state_csv(
    path: &Path,
    report: &AggregateReport,
    targets: &[TestTarget],
) -> Result<(), TrialsError> {
    assert_eq!(
        report.per_state.len(),
        targets.len(),
        "report and test targets must cover the same states"
    );
    let mut s = String::from("state,actual,mean_predicted,adl,ape\n");
    for (agg, t) in report.per_state.iter().zip(targets) {
        assert_eq!(
            agg.state, t.state,
            "report and test targets must be in the same state order"
        );
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            agg.state,
            t.actual,
            t.actual + agg.adl,
            agg.adl,
            agg.ape
        ));
    }
    write_file(path, &s)
}

/// The aggregate report as pretty-printed JSON.
pub fn write_report_json(path: &Path, report: &AggregateReport) -> Result<(), TrialsError> {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    write_file(path, &s)
}

/// The error-bar chart as a standalone SVG at the given pixel size.
pub fn write_error_bars_svg(
    path: &Path,
    report: &AggregateReport,
    predictions: &[StatePrediction],
    width: u32,
    height: u32,
) -> Result<(), TrialsError> {
    let (mut chart, mut svg) = chart::render_error_bars(report, predictions);
    if (chart.width, chart.height) != (width, height) {
        chart.width = width;
        chart.height = height;
        svg = chart.to_svg();
    }
    write_file(path, &svg)
}
