//! End-to-end acceptance checks, one per shipping criterion. Each test
//! prints a single `ACCEPTANCE <n> (<name>): PASS`/`FAIL` line (visible
//! with `--nocapture`, or in the failure report).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use panelcast::eval::{self, StateError, StatePrediction, TrialMetrics};
use panelcast::features::{self, TARGET_FEATURE};
use panelcast::net::{
    self, gradient_check, gradient_check_against, gru_forward, init_params, lstm_forward,
    network_backward, network_forward, GruParams, LstmParams, Mode, NetworkShape,
};
use panelcast::panel::synthesize_panel;
use panelcast::rng;
use panelcast::train::{self, TrainConfig};
use rand::Rng;

fn criterion(n: u32, name: &str, body: impl FnOnce()) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("ACCEPTANCE {n} ({name}): PASS"),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("panic");
            println!("ACCEPTANCE {n} ({name}): FAIL — {msg}");
            std::panic::resume_unwind(panic);
        }
    }
}

#[test]
fn acceptance_1_reference_metric_consistency() {
    criterion(1, "reference metric consistency", || {
        let ca = eval::percent_error(174_331.0 + 4_466.7, 174_331.0).unwrap();
        assert!(
            (ca - 2.6).abs() <= 0.05,
            "CA percent error {ca} not within 0.05 of 2.6"
        );
        let fl = eval::percent_error(81_270.0 + 6_358.0, 81_270.0).unwrap();
        assert!(
            (fl - 7.8).abs() <= 0.05,
            "FL percent error {fl} not within 0.05 of 7.8"
        );
    });
}

#[test]
fn acceptance_2_gradient_correctness() {
    criterion(2, "gradient correctness", || {
        let start = Instant::now();
        // 20 seeded random configurations up to (input 10, LSTM 8, GRU 4,
        // T=5). The target sits a fixed small offset from the prediction so
        // the finite-difference noise floor (which scales with the loss)
        // stays far below the tolerance even for near-zero gradients.
        for seed in 0..20u64 {
            let mut r = rng::stream(seed, &[901]);
            let shape = NetworkShape {
                input_size: r.random_range(1..=10),
                lstm_hidden: r.random_range(1..=8),
                gru_hidden: r.random_range(1..=4),
                dropout_rate: 0.2,
            };
            let t_len = r.random_range(1..=5);
            let sequence: Vec<Vec<f64>> = (0..t_len)
                .map(|_| {
                    (0..shape.input_size)
                        .map(|_| r.random_range(-1.5..1.5))
                        .collect()
                })
                .collect();
            let params = init_params(seed, shape);
            let (pred, _) = network_forward(&params, &sequence, Mode::Eval);
            let sign = if seed % 2 == 0 { 1.0 } else { -1.0 };
            let err = gradient_check(&params, &sequence, pred + sign * 1e-3, 1e-5);
            assert!(
                err < 1e-5,
                "seed {seed}: max relative error {err:.3e} >= 1e-5"
            );
        }

        // Sabotage detection: zeroing any one gate's gradients must be loud.
        let shape = NetworkShape {
            input_size: 10,
            lstm_hidden: 8,
            gru_hidden: 4,
            dropout_rate: 0.2,
        };
        let mut r = rng::stream(3, &[902]);
        let sequence: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..10).map(|_| r.random_range(-1.5..1.5)).collect())
            .collect();
        let params = init_params(3, shape);
        let (prediction, cache) = network_forward(&params, &sequence, Mode::Eval);
        let target = prediction + 1e-3;
        let grads = network_backward(&params, &cache, 2.0 * (prediction - target));
        for gate in 0..7 {
            let mut corrupted = grads.clone();
            for tensor in &mut corrupted.tensors_mut()[3 * gate..3 * gate + 3] {
                tensor.fill(0.0);
            }
            let err = gradient_check_against(&params, &sequence, target, 1e-5, &corrupted);
            assert!(
                err > 1e-2,
                "zeroed gate {gate} only reached error {err:.3e}"
            );
        }
        assert!(
            start.elapsed().as_secs() < 30,
            "gradient checks exceeded 30 s"
        );
    });
}

#[test]
fn acceptance_3_cell_fixed_points() {
    criterion(3, "cell fixed points", || {
        let mut r = rng::stream(5, &[903]);
        let sequence: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();

        let lstm = LstmParams::zeros(4, 3);
        let (hs, _) = lstm_forward(&lstm, &sequence, &[0.0; 3], &[0.0; 3]);
        for h in &hs {
            assert!(
                h.iter().all(|v| v.abs() <= 1e-12),
                "zero-parameter LSTM moved: {h:?}"
            );
        }

        let gru = GruParams::zeros(4, 3);
        let h0 = [0.8, -0.4, 1.6];
        let (hs, _) = gru_forward(&gru, &sequence, &h0);
        for (t, h) in hs.iter().enumerate() {
            let scale = 0.5f64.powi(t as i32 + 1);
            for (j, v) in h.iter().enumerate() {
                assert!(
                    (v - scale * h0[j]).abs() <= 1e-12,
                    "zero-parameter GRU step {t} unit {j}: {v} != {}",
                    scale * h0[j]
                );
            }
        }
    });
}

#[test]
fn acceptance_4_callback_state_machines() {
    criterion(4, "callback state machines", || {
        let shape = NetworkShape::default();

        // Early stopping: improvements, then a flat stream; the stop signal
        // must land exactly on the 10th non-improving epoch.
        let params = net::NetworkParams::zeros(shape);
        let mut es = train::EarlyStopState::new(&params);
        let mut stopped_at = None;
        let losses = [1.0, 0.9, 0.8]
            .iter()
            .copied()
            .chain(std::iter::repeat(0.8))
            .take(20);
        for (epoch, loss) in losses.enumerate() {
            if es.update(loss, &params, epoch, 10) {
                stopped_at = Some(epoch);
                break;
            }
        }
        // Improvements at epochs 0..2; non-improving epochs 3..12 are the
        // 1st through 10th flat evaluations.
        assert_eq!(
            stopped_at,
            Some(12),
            "early stop missed the 10th non-improving epoch"
        );

        // Plateau scheduler: a flat stream halves the rate after epochs 5
        // and 10 (patience 5, factor 0.5).
        let mut sched = train::LrSchedulerState::new(0.001);
        let mut reductions = Vec::new();
        for epoch in 0..12 {
            if sched.update(1.0, 5, 0.5, 1e-6) {
                reductions.push((epoch, sched.current_lr));
            }
        }
        assert_eq!(
            reductions,
            vec![(5, 0.0005), (10, 0.00025)],
            "wrong reduction schedule"
        );

        // Best-snapshot restoration: the kept parameters must come from the
        // stream's argmin epoch.
        let stream = [0.9, 0.7, 0.85, 0.4, 0.6, 0.45, 0.55];
        let mut es = train::EarlyStopState::new(&params);
        for (epoch, &loss) in stream.iter().enumerate() {
            let mut tagged = params.clone();
            tagged.head.b = epoch as f64;
            es.update(loss, &tagged, epoch, 10);
        }
        assert_eq!(
            es.best_params.head.b, 3.0,
            "snapshot is not from the argmin epoch"
        );
        assert_eq!(es.best_epoch, 3);
    });
}

#[test]
fn acceptance_5_pipeline_counting() {
    criterion(5, "pipeline counting", || {
        let data = synthesize_panel(1, 50, 2000, 20).unwrap();
        let sequences = features::build_sequences(&data, 5, 3, 4).unwrap();
        assert_eq!(
            sequences.len(),
            600,
            "expected 12 sequences per state across 50 states"
        );
        for state in &data.states {
            assert_eq!(sequences.iter().filter(|s| &s.state == state).count(), 12);
        }
        let split = features::time_series_split(sequences).unwrap();
        assert_eq!(
            (split.train.len(), split.validation.len(), split.test.len()),
            (500, 50, 50),
            "split sizes off"
        );
    });
}

#[test]
fn acceptance_6_learnability() {
    criterion(6, "learnability", || {
        let start = Instant::now();
        let data = synthesize_panel(4, 10, 2000, 20).unwrap();
        let sequences = features::build_sequences(&data, 5, 3, 4).unwrap();
        let split = features::time_series_split(sequences).unwrap();
        let scaler = features::fit_scaler(&split.train).unwrap();
        let scaled = features::SplitDataset {
            train: scaler.apply(&split.train),
            validation: scaler.apply(&split.validation),
            test: scaler.apply(&split.test),
        };

        let config = TrainConfig::default();
        let (params, _) = train::train_model(&scaled, &config).unwrap();

        let val_preds = train::predict(&params, &scaled.validation);
        let val_targets: Vec<f64> = scaled.validation.iter().map(|s| s.target).collect();
        let (val_mse, _) = train::mse_loss(&val_preds, &val_targets);
        let baseline = features::persistence_mse(&scaled.validation);
        assert!(
            val_mse < baseline,
            "validation MSE {val_mse:.6} does not beat persistence {baseline:.6}"
        );

        let test_preds = train::predict(&params, &scaled.test);
        let mape = scaled
            .test
            .iter()
            .zip(&test_preds)
            .map(|(s, &p)| {
                let predicted = scaler.unscale_target(p);
                let actual = scaler.unscale_target(s.target);
                (eval::percent_error(predicted, actual).unwrap()).abs()
            })
            .sum::<f64>()
            / scaled.test.len() as f64;
        assert!(mape < 25.0, "test MAPE {mape:.2}% is not below 25%");
        assert!(
            start.elapsed().as_secs() < 120,
            "learnability run exceeded two minutes"
        );
    });
}

#[test]
fn acceptance_7_trial_determinism() {
    criterion(7, "trial determinism", || {
        let dir = tempfile::tempdir().unwrap();
        let bin = env!("CARGO_BIN_EXE_panelcast");
        let panel = dir.path().join("panel.csv");

        let status = Command::new(bin)
            .args([
                "synth",
                "--seed",
                "3",
                "--states",
                "5",
                "--first-year",
                "2000",
                "--years",
                "20",
            ])
            .arg(&panel)
            .status()
            .unwrap();
        assert!(status.success(), "synth failed");

        let cfg = dir.path().join("cfg.json");
        std::fs::write(
            &cfg,
            format!(
                r#"{{"data_path": {:?}, "n_trials": 3}}"#,
                panel.to_str().unwrap()
            ),
        )
        .unwrap();

        let run = |out: &str| {
            let out_dir = dir.path().join(out);
            let status = Command::new(bin)
                .args(["trials", "--zero-timing", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out_dir)
                .status()
                .unwrap();
            assert!(status.success(), "trials run failed");
            out_dir
        };
        let a = run("out_a");
        let b = run("out_b");
        for file in ["trials.csv", "per_state.csv", "report.json"] {
            let left = std::fs::read(a.join(file)).unwrap();
            let right = std::fs::read(b.join(file)).unwrap();
            assert_eq!(left, right, "{file} differs between identical runs");
        }
        let rows = std::fs::read_to_string(a.join("trials.csv")).unwrap();
        assert_eq!(rows.lines().count(), 4, "expected header + 3 trial rows");
    });
}

#[test]
fn acceptance_8_metric_oracles() {
    criterion(8, "metric oracles", || {
        let mut r = rng::stream(88, &[904]);
        for case in 0..100 {
            let n = r.random_range(1..=50usize);
            let preds: Vec<StatePrediction> = (0..n)
                .map(|i| StatePrediction {
                    state: format!("S{i}"),
                    year: 2019,
                    predicted: r.random_range(50.0..250_000.0),
                    actual: r.random_range(50.0..250_000.0),
                })
                .collect();

            let mut want_total = 0.0;
            let mut want_sse = 0.0;
            for p in &preds {
                want_total += (p.predicted - p.actual).abs();
                want_sse += (p.predicted - p.actual) * (p.predicted - p.actual);
            }
            let total = eval::total_loss(&preds).unwrap();
            let mse = eval::test_mse(&preds).unwrap();
            assert!((total - want_total).abs() < 1e-9, "case {case}: total_loss");
            assert!(
                (mse - want_sse / n as f64).abs() < 1e-9 * want_sse.max(1.0),
                "case {case}: test_mse"
            );
            for p in &preds {
                let pe = eval::percent_error(p.predicted, p.actual).unwrap();
                let want = 100.0 * (p.predicted - p.actual) / p.actual;
                assert!((pe - want).abs() < 1e-9, "case {case}: percent_error");
            }
            // Jensen: mean of squares dominates square of mean |diff|.
            let mean_abs = total / n as f64;
            assert!(
                mse >= mean_abs * mean_abs - 1e-9,
                "case {case}: Jensen violated"
            );

            // Aggregation over a random trial list built from this case.
            let n_trials = r.random_range(1..=6usize);
            let trials: Vec<TrialMetrics> = (0..n_trials)
                .map(|id| TrialMetrics {
                    trial_id: id,
                    seed: id as u64,
                    total_loss: r.random_range(0.0..1e5),
                    test_mse: r.random_range(0.0..1e7),
                    per_state: preds
                        .iter()
                        .map(|p| StateError {
                            state: p.state.clone(),
                            signed_diff: r.random_range(-1e3..1e3),
                            percent_error: r.random_range(-40.0..40.0),
                        })
                        .collect(),
                    wall_time_s: r.random_range(0.0..60.0),
                    cpu_time_s: r.random_range(0.0..60.0),
                    stopped_epoch: r.random_range(1..100),
                })
                .collect();
            let report = eval::aggregate_trials(&trials).unwrap();
            let values: Vec<f64> = trials.iter().map(|t| t.total_loss).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / values.len() as f64)
                .sqrt();
            assert!(
                (report.total_loss.mean - mean).abs() < 1e-9,
                "case {case}: agg mean"
            );
            assert!(
                (report.total_loss.range - (max - min)).abs() < 1e-9,
                "case {case}: agg range"
            );
            assert!(
                (report.total_loss.std - std).abs() < 1e-9,
                "case {case}: agg std"
            );
            for (i, agg) in report.per_state.iter().enumerate() {
                let adl = trials
                    .iter()
                    .map(|t| t.per_state[i].signed_diff)
                    .sum::<f64>()
                    / n_trials as f64;
                assert!((agg.adl - adl).abs() < 1e-9, "case {case}: per-state ADL");
            }
        }
    });
}

#[test]
fn acceptance_9_error_bar_chart_reconstruction() {
    criterion(9, "error-bar chart reconstruction", || {
        use panelcast::chart::render_error_bars;
        use panelcast::eval::{AggregateReport, MetricSummary, StateAggregate};

        let zero = MetricSummary {
            mean: 0.0,
            range: 0.0,
            std: 0.0,
        };
        let states = [
            "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "IA",
        ];
        let report = AggregateReport {
            n_trials: 50,
            total_loss: zero.clone(),
            test_mse: MetricSummary {
                mean: 4_000_000.0,
                range: 0.0,
                std: 0.0,
            },
            wall_time_s: zero.clone(),
            cpu_time_s: zero.clone(),
            stopped_epoch: zero,
            per_state: states
                .iter()
                .enumerate()
                .map(|(i, s)| StateAggregate {
                    state: (*s).into(),
                    adl: (i as f64 - 6.0) * 300.0,
                    ape: 0.0,
                })
                .collect(),
        };
        let predictions: Vec<StatePrediction> = states
            .iter()
            .enumerate()
            .map(|(i, s)| StatePrediction {
                state: (*s).into(),
                year: 2019,
                predicted: 0.0,
                actual: 30_000.0 + 4_000.0 * i as f64,
            })
            .collect();

        let (chart, svg) = render_error_bars(&report, &predictions);
        assert_eq!(
            chart.half_width, 2_000.0,
            "half-width must be exactly √4,000,000"
        );

        let doc = roxmltree::Document::parse(&svg).expect("SVG is not well-formed XML");
        let groups: Vec<_> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("state-bar"))
            .collect();
        assert_eq!(groups.len(), 12, "expected one bar group per state");
        for g in &groups {
            assert_eq!(g.children().filter(|c| c.has_tag_name("circle")).count(), 1);
            assert!(g.children().filter(|c| c.has_tag_name("line")).count() >= 1);
        }
    });
}

#[test]
fn acceptance_6_observes_target_feature_contract() {
    // Companion sanity for the learnability criterion: the persistence
    // baseline reads the prior year's violent crime from the input rows, so
    // the target feature must be the first column.
    assert_eq!(TARGET_FEATURE, 0);
}
