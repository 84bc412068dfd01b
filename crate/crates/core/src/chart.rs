//! Error-bar chart: one marker per state at (actual, mean predicted) with a
//! shared vertical bar of half-width √(mean test MSE), emitted as a
//! standalone SVG document.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::eval::{AggregateReport, StatePrediction};

pub const DEFAULT_WIDTH: u32 = 800;
pub const DEFAULT_HEIGHT: u32 = 600;

/// One state's marker position in data coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub state: String,
    pub actual: f64,
    pub mean_predicted: f64,
}

/// Chart description: marker per state, one uniform RMSE bar half-width,
/// axis labels, and the output pixel size.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBarChart {
    pub points: Vec<ChartPoint>,
    pub half_width: f64,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
}

/// Builds the chart for a report and renders it at the default 800×600.
/// Mean predicted values are reconstructed as actual + ADL; the bar
/// half-width is the square root of the mean test MSE. `predictions`
/// supplies the actual value for every state in the report (extra states are
/// ignored); a missing state is a caller bug and panics.
pub fn render_error_bars(
    report: &AggregateReport,
    predictions: &[StatePrediction],
) -> (ErrorBarChart, String) {
    assert!(
        !report.per_state.is_empty(),
        "report must cover at least one state"
    );
    let actuals: BTreeMap<&str, f64> = predictions
        .iter()
        .map(|p| (p.state.as_str(), p.actual))
        .collect();
    let points = report
        .per_state
        .iter()
        .map(|s| {
            let actual = *actuals
                .get(s.state.as_str())
                .unwrap_or_else(|| panic!("no prediction supplied for state {}", s.state));
            ChartPoint {
                state: s.state.clone(),
                actual,
                mean_predicted: actual + s.adl,
            }
        })
        .collect();
    let chart = ErrorBarChart {
        points,
        half_width: report.test_mse.mean.sqrt(),
        title: "Predicted vs actual violent crime".into(),
        x_label: "Actual violent crime".into(),
        y_label: "Mean predicted violent crime".into(),
        width: DEFAULT_WIDTH,
        height: DEFAULT_HEIGHT,
    };
    let svg = chart.to_svg();
    (chart, svg)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_value(v: f64, span: f64) -> String {
    if span >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

impl ErrorBarChart {
    /// Renders the chart as a standalone SVG string at `self.width` ×
    /// `self.height`. Both axes share one data range so the y=x reference
    /// line is at 45°.
    pub fn to_svg(&self) -> String {
        assert!(
            !self.points.is_empty(),
            "chart must contain at least one point"
        );
        let w = self.width as f64;
        let h = self.height as f64;
        let (ml, mr, mt, mb) = (80.0, 30.0, 50.0, 70.0);

        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.points {
            lo = lo.min(p.actual).min(p.mean_predicted - self.half_width);
            hi = hi.max(p.actual).max(p.mean_predicted + self.half_width);
        }
        if hi - lo < 1e-12 {
            let pad = lo.abs().max(1.0) * 0.1;
            lo -= pad;
            hi += pad;
        }
        let pad = (hi - lo) * 0.05;
        lo -= pad;
        hi += pad;
        let span = hi - lo;

        let x = |v: f64| ml + (v - lo) / span * (w - ml - mr);
        let y = |v: f64| h - mb - (v - lo) / span * (h - mt - mb);

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}">"#,
            self.width, self.height
        );
        let _ = writeln!(
            s,
            r##"<rect class="background" width="{w}" height="{h}" fill="#ffffff"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text class="title" x="{:.2}" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">{}</text>"#,
            w / 2.0,
            esc(&self.title)
        );

        // Frame and ticks.
        let _ = writeln!(s, r##"<g class="axes" stroke="#000000" fill="none">"##);
        let _ = writeln!(
            s,
            r#"<line x1="{ml:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}"/>"#,
            h - mb,
            w - mr
        );
        let _ = writeln!(
            s,
            r#"<line x1="{ml:.2}" y1="{mt:.2}" x2="{ml:.2}" y2="{0:.2}"/>"#,
            h - mb
        );
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<g class="ticks" font-family="sans-serif" font-size="11">"#
        );
        for i in 0..=4 {
            let v = lo + span * i as f64 / 4.0;
            let (tx, ty) = (x(v), y(v));
            let _ = writeln!(
                s,
                r##"<line x1="{tx:.2}" y1="{0:.2}" x2="{tx:.2}" y2="{1:.2}" stroke="#000000"/>"##,
                h - mb,
                h - mb + 5.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{tx:.2}" y="{0:.2}" text-anchor="middle">{1}</text>"#,
                h - mb + 18.0,
                fmt_value(v, span)
            );
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{ty:.2}" x2="{ml:.2}" y2="{ty:.2}" stroke="#000000"/>"##,
                ml - 5.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{0:.2}" y="{1:.2}" text-anchor="end">{2}</text>"#,
                ml - 8.0,
                ty + 4.0,
                fmt_value(v, span)
            );
        }
        let _ = writeln!(s, "</g>");

        // y = x reference.
        let _ = writeln!(
            s,
            r##"<line class="reference" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888888" stroke-dasharray="5 4"/>"##,
            x(lo),
            y(lo),
            x(hi),
            y(hi)
        );

        // One group per state: RMSE bar with caps, marker, label.
        for p in &self.points {
            let (px, py) = (x(p.actual), y(p.mean_predicted));
            let (y_top, y_bot) = (
                y(p.mean_predicted + self.half_width),
                y(p.mean_predicted - self.half_width),
            );
            let _ = writeln!(s, r#"<g class="state-bar" data-state="{}">"#, esc(&p.state));
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{y_top:.2}" x2="{px:.2}" y2="{y_bot:.2}" stroke="#c0392b"/>"##
            );
            for cap_y in [y_top, y_bot] {
                let _ = writeln!(
                    s,
                    r##"<line x1="{0:.2}" y1="{cap_y:.2}" x2="{1:.2}" y2="{cap_y:.2}" stroke="#c0392b"/>"##,
                    px - 4.0,
                    px + 4.0
                );
            }
            let _ = writeln!(
                s,
                r##"<circle cx="{px:.2}" cy="{py:.2}" r="3.5" fill="#2c3e50"/>"##
            );
            let _ = writeln!(
                s,
                r##"<text x="{0:.2}" y="{1:.2}" font-family="sans-serif" font-size="10" fill="#2c3e50">{2}</text>"##,
                px + 6.0,
                py - 4.0,
                esc(&p.state)
            );
            let _ = writeln!(s, "</g>");
        }

        let _ = writeln!(
            s,
            r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
            ml + (w - ml - mr) / 2.0,
            h - 20.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text class="y-label" x="22" y="{0:.2}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 22 {0:.2})">{1}</text>"#,
            mt + (h - mt - mb) / 2.0,
            esc(&self.y_label)
        );
        s.push_str("</svg>\n");
        s
    }
}
