//! Trial metrics and aggregation: absolute-difference total loss, test MSE,
//! signed percent errors, and mean/range/std summaries across repeated
//! trials.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("percent error undefined for actual value 0")]
    ZeroActual,
    #[error("trial {trial_id} covers a different state set than trial {first_trial_id}")]
    InconsistentStateSets {
        trial_id: usize,
        first_trial_id: usize,
    },
}

/// One state's forecast for the held-out year, in original (unscaled) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePrediction {
    pub state: String,
    pub year: i32,
    pub predicted: f64,
    pub actual: f64,
}

/// Per-state error entry inside a trial: difference and percent error keep
/// their sign.
#[derive(Debug, Clone, PartialEq)]
pub struct StateError {
    pub state: String,
    pub signed_diff: f64,
    pub percent_error: f64,
}

/// Everything measured in one training trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub trial_id: usize,
    pub seed: u64,
    pub total_loss: f64,
    pub test_mse: f64,
    pub per_state: Vec<StateError>,
    pub wall_time_s: f64,
    pub cpu_time_s: f64,
    pub stopped_epoch: usize,
}

/// Mean, range (max−min), and population standard deviation of one scalar
/// metric across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub range: f64,
    pub std: f64,
}

/// Per-state cross-trial averages: ADL is the signed mean difference, APE
/// the signed mean percent error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateAggregate {
    pub state: String,
    pub adl: f64,
    pub ape: f64,
}

/// Cross-trial summary of every scalar metric plus per-state averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n_trials: usize,
    pub total_loss: MetricSummary,
    pub test_mse: MetricSummary,
    pub wall_time_s: MetricSummary,
    pub cpu_time_s: MetricSummary,
    pub stopped_epoch: MetricSummary,
    pub per_state: Vec<StateAggregate>,
}

/// Sum of absolute differences over all states: Σ|predicted − actual|.
pub fn total_loss(predictions: &[StatePrediction]) -> Result<f64, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput("total_loss"));
    }
    Ok(predictions
        .iter()
        .map(|p| (p.predicted - p.actual).abs())
        .sum())
}

/// Mean squared difference over all states: (1/n)Σ(predicted − actual)².
pub fn test_mse(predictions: &[StatePrediction]) -> Result<f64, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput("test_mse"));
    }
    let sse: f64 = predictions
        .iter()
        .map(|p| (p.predicted - p.actual).powi(2))
        .sum();
    Ok(sse / predictions.len() as f64)
}

/// Signed percent error: 100·(predicted − actual)/actual.
pub fn percent_error(predicted: f64, actual: f64) -> Result<f64, EvalError> {
    if actual == 0.0 {
        return Err(EvalError::ZeroActual);
    }
    Ok(100.0 * (predicted - actual) / actual)
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sq_dev = 0.0;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sq_dev += (v - mean) * (v - mean);
    }
    MetricSummary {
        mean,
        range: max - min,
        std: (sq_dev / n).sqrt(),
    }
}

/// Collapses a list of trials into means, ranges, and population standard
/// deviations per scalar metric, plus signed per-state ADL/APE averages.
/// All trials must cover the same states in the same order.
pub fn aggregate_trials(trials: &[TrialMetrics]) -> Result<AggregateReport, EvalError> {
    let first = trials
        .first()
        .ok_or(EvalError::EmptyInput("aggregate_trials"))?;
    for t in trials {
        let same = t.per_state.len() == first.per_state.len()
            && t.per_state
                .iter()
                .zip(&first.per_state)
                .all(|(a, b)| a.state == b.state);
        if !same {
            return Err(EvalError::InconsistentStateSets {
                trial_id: t.trial_id,
                first_trial_id: first.trial_id,
            });
        }
    }

    let collect = |f: fn(&TrialMetrics) -> f64| -> Vec<f64> { trials.iter().map(f).collect() };
    let n = trials.len() as f64;
    let per_state = first
        .per_state
        .iter()
        .enumerate()
        .map(|(i, entry)| StateAggregate {
            state: entry.state.clone(),
            adl: trials
                .iter()
                .map(|t| t.per_state[i].signed_diff)
                .sum::<f64>()
                / n,
            ape: trials
                .iter()
                .map(|t| t.per_state[i].percent_error)
                .sum::<f64>()
                / n,
        })
        .collect();

    Ok(AggregateReport {
        n_trials: trials.len(),
        total_loss: summarize(&collect(|t| t.total_loss)),
        test_mse: summarize(&collect(|t| t.test_mse)),
        wall_time_s: summarize(&collect(|t| t.wall_time_s)),
        cpu_time_s: summarize(&collect(|t| t.cpu_time_s)),
        stopped_epoch: summarize(&collect(|t| t.stopped_epoch as f64)),
        per_state,
    })
}
