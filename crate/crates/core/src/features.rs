//! Feature engineering: lagged sequences with rolling crime statistics,
//! z-score scaling fit on the training split only, and the chronological
//! train/validation/test split.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::panel::{PanelDataset, PoliticalStatus};

/// Column order of every engineered feature vector.
pub const FEATURE_NAMES: [&str; 10] = [
    "violent_crime",
    "population",
    "unemployment_rate",
    "median_income",
    "hs_grad_rate",
    "political_status_encoded",
    "pct_male",
    "pct_female",
    "crime_rolling_mean",
    "crime_rolling_std",
];

/// Index of the violent-crime column — targets are scaled with its statistics.
pub const TARGET_FEATURE: usize = 0;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error(
        "state {state}: {available} years of history, but lag {lag} with rolling windows \
         up to {max_window} needs at least {needed}"
    )]
    InsufficientHistory {
        state: String,
        available: usize,
        lag: usize,
        max_window: usize,
        needed: usize,
    },
    #[error("state {state} has only {count} sequences; the chronological split needs at least 3")]
    TooFewSequences { state: String, count: usize },
    #[error("cannot fit a scaler on an empty training set")]
    EmptyTrainingSet,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// R→−1, D→+1, S→0: a symmetric encoding with split status at the midpoint.
pub fn encode_political(status: PoliticalStatus) -> f64 {
    match status {
        PoliticalStatus::R => -1.0,
        PoliticalStatus::D => 1.0,
        PoliticalStatus::S => 0.0,
    }
}

/// Trailing mean over `window` points. `output[t]` covers
/// `series[t−window+1 ..= t]`; the first `window−1` positions are `None`.
/// Panics if `window == 0`; errors if the window exceeds the series.
pub fn rolling_mean(series: &[f64], window: usize) -> Result<Vec<Option<f64>>, FeatureError> {
    assert!(window >= 1, "rolling_mean: window must be at least 1");
    if window > series.len() {
        return Err(FeatureError::WindowTooLarge {
            window,
            len: series.len(),
        });
    }
    let mut out = vec![None; series.len()];
    for t in window - 1..series.len() {
        let w = &series[t + 1 - window..=t];
        out[t] = Some(w.iter().sum::<f64>() / window as f64);
    }
    Ok(out)
}

/// Trailing population standard deviation (divide by `window`, not
/// `window−1`) over `window` points, `None` prefix as in [`rolling_mean`].
/// Panics if `window < 2`; errors if the window exceeds the series.
pub fn rolling_std(series: &[f64], window: usize) -> Result<Vec<Option<f64>>, FeatureError> {
    assert!(window >= 2, "rolling_std: window must be at least 2");
    if window > series.len() {
        return Err(FeatureError::WindowTooLarge {
            window,
            len: series.len(),
        });
    }
    let mut out = vec![None; series.len()];
    for t in window - 1..series.len() {
        let w = &series[t + 1 - window..=t];
        let mean = w.iter().sum::<f64>() / window as f64;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / window as f64;
        out[t] = Some(var.sqrt());
    }
    Ok(out)
}

/// One training example: five consecutive engineered feature rows and the
/// following year's violent-crime count as the target.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSequence {
    pub state: String,
    pub target_year: i32,
    /// lag×10 matrix; row r describes year `target_year − lag + r`.
    pub inputs: Vec<Vec<f64>>,
    pub target: f64,
}

/// Turns a rectangular panel into sequences: for each state and each target
/// year with `lag` fully-defined engineered rows before it, emit one sample.
/// Rolling statistics (windows `mean_window`/`std_window`) are computed over
/// the violent-crime series and consumed only as lagged rows, so every input
/// value predates the target year.
///
/// Sequence counting: the lag window alone turns an N-year series into
/// N − lag samples (20 years → 15 at the default lag 5). Because the rolling
/// statistics need a full window before the *first* lagged row, the largest
/// window spends a further `max(mean_window, std_window) − 1` leading years,
/// leaving N − lag − (max_window − 1) samples — with 20 years, lag 5, and
/// windows 3/4, each state yields 12 sequences.
pub fn build_sequences(
    dataset: &PanelDataset,
    lag: usize,
    mean_window: usize,
    std_window: usize,
) -> Result<Vec<SampleSequence>, FeatureError> {
    assert!(lag >= 1, "build_sequences: lag must be at least 1");
    let max_window = mean_window.max(std_window);
    let mut sequences = Vec::new();

    for state in &dataset.states {
        let series = dataset.state_series(state);
        let needed = lag + max_window;
        if series.len() < needed {
            return Err(FeatureError::InsufficientHistory {
                state: state.clone(),
                available: series.len(),
                lag,
                max_window,
                needed,
            });
        }

        let crime: Vec<f64> = series.iter().map(|r| r.violent_crime).collect();
        let means = rolling_mean(&crime, mean_window)?;
        let stds = rolling_std(&crime, std_window)?;

        // Engineered row per year; None until both rolling columns exist.
        let rows: Vec<Option<Vec<f64>>> = series
            .iter()
            .enumerate()
            .map(|(t, r)| {
                let (mean, std) = (means[t]?, stds[t]?);
                Some(vec![
                    r.violent_crime,
                    r.population,
                    r.unemployment_rate,
                    r.median_income,
                    r.hs_grad_rate,
                    encode_political(r.political_status),
                    r.pct_male,
                    r.pct_female,
                    mean,
                    std,
                ])
            })
            .collect();

        for t in lag + max_window - 1..series.len() {
            let inputs: Vec<Vec<f64>> = (t - lag..t)
                .map(|k| rows[k].clone().expect("lagged rows defined"))
                .collect();
            sequences.push(SampleSequence {
                state: state.clone(),
                target_year: series[t].year,
                inputs,
                target: crime[t],
            });
        }
    }
    Ok(sequences)
}

/// Per-feature standardization statistics, fit on training rows only.
/// Targets share the violent-crime column's mean/std.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Mean and population std per feature column over every timestep row of
/// every training sequence. Stds are floored at 1e−8 so constant columns
/// scale to zero instead of dividing by zero.
pub fn fit_scaler(train: &[SampleSequence]) -> Result<Scaler, FeatureError> {
    let n_features = match train.first() {
        Some(seq) => seq.inputs[0].len(),
        None => return Err(FeatureError::EmptyTrainingSet),
    };
    let rows: Vec<&Vec<f64>> = train.iter().flat_map(|s| &s.inputs).collect();
    let n = rows.len() as f64;

    let mut means = vec![0.0; n_features];
    for row in &rows {
        for (m, v) in means.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; n_features];
    for row in &rows {
        for ((s, v), m) in stds.iter_mut().zip(row.iter()).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt().max(1e-8);
    }
    Ok(Scaler { means, stds })
}

impl Scaler {
    /// (x − mean) / std per column; the target uses the violent-crime stats.
    pub fn apply(&self, sequences: &[SampleSequence]) -> Vec<SampleSequence> {
        sequences
            .iter()
            .map(|seq| SampleSequence {
                state: seq.state.clone(),
                target_year: seq.target_year,
                inputs: seq
                    .inputs
                    .iter()
                    .map(|row| {
                        row.iter()
                            .zip(&self.means)
                            .zip(&self.stds)
                            .map(|((v, m), s)| (v - m) / s)
                            .collect()
                    })
                    .collect(),
                target: self.scale_target(seq.target),
            })
            .collect()
    }

    pub fn scale_target(&self, value: f64) -> f64 {
        (value - self.means[TARGET_FEATURE]) / self.stds[TARGET_FEATURE]
    }

    /// Inverse of [`Scaler::scale_target`].
    pub fn unscale_target(&self, scaled: f64) -> f64 {
        scaled * self.stds[TARGET_FEATURE] + self.means[TARGET_FEATURE]
    }
}

/// Chronological split: test is the newest target year across the dataset,
/// validation the second newest, training everything earlier.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Vec<SampleSequence>,
    pub validation: Vec<SampleSequence>,
    pub test: Vec<SampleSequence>,
}

pub fn time_series_split(sequences: Vec<SampleSequence>) -> Result<SplitDataset, FeatureError> {
    let mut per_state: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &sequences {
        *per_state.entry(&s.state).or_insert(0) += 1;
    }
    for (state, count) in per_state {
        if count < 3 {
            return Err(FeatureError::TooFewSequences {
                state: state.to_string(),
                count,
            });
        }
    }

    let mut years: Vec<i32> = sequences.iter().map(|s| s.target_year).collect();
    years.sort_unstable();
    years.dedup();
    let test_year = years[years.len() - 1];
    let val_year = years[years.len() - 2];

    let mut split = SplitDataset {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for seq in sequences {
        if seq.target_year == test_year {
            split.test.push(seq);
        } else if seq.target_year == val_year {
            split.validation.push(seq);
        } else {
            split.train.push(seq);
        }
    }
    Ok(split)
}

/// Mean squared error of the persistence forecast (each sequence's last
/// violent-crime input predicts its target) — the floor a model must beat.
/// Works on scaled or unscaled sequences alike.
pub fn persistence_mse(sequences: &[SampleSequence]) -> f64 {
    assert!(
        !sequences.is_empty(),
        "persistence_mse: need at least one sequence"
    );
    let sse: f64 = sequences
        .iter()
        .map(|s| {
            let last = s.inputs.last().expect("nonempty inputs")[TARGET_FEATURE];
            (last - s.target) * (last - s.target)
        })
        .sum();
    sse / sequences.len() as f64
}

/// Debug export: one CSV row per (state, target_year, timestep) holding the
/// 10 feature columns plus the target.
pub fn write_sequences_csv(
    sequences: &[SampleSequence],
    path: impl AsRef<Path>,
) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let io_err = |source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(
            w,
            "state,target_year,timestep,{},target",
            FEATURE_NAMES.join(",")
        )?;
        for seq in sequences {
            for (t, row) in seq.inputs.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(f64::to_string).collect();
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    seq.state,
                    seq.target_year,
                    t,
                    cells.join(","),
                    seq.target
                )?;
            }
        }
        w.flush()
    };
    emit().map_err(io_err)
}
