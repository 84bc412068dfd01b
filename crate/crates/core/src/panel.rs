//! State-year panel schema: CSV ingestion, validation, and a seeded
//! synthetic-panel generator for desk-scale runs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::rng::{self, tag};

/// The 50 state codes in the conventional order (alphabetical by state name).
pub const STATE_CODES: [&str; 50] = [
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "ID", "IL", "IN", "IA", "KS",
    "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM", "NY",
    "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV",
    "WI", "WY",
];

/// Exact header line of the panel CSV format.
pub const CSV_HEADER: &str = "state,year,violent_crime,population,unemployment_rate,\
median_income,hs_grad_rate,political_status,pct_male,pct_female";

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header: expected `{expected}`, got `{got}`")]
    BadHeader { expected: String, got: String },
    #[error("line {line}: malformed row ({message})")]
    MalformedRow { line: u64, message: String },
    #[error("line {line}: unknown political status `{value}` (expected R, D, or S)")]
    UnknownPoliticalStatus { line: u64, value: String },
    #[error("duplicate record for state {state}, year {year}")]
    DuplicateStateYear { state: String, year: i32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Per-state-per-year political leaning: Republican, Democratic, or Split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoliticalStatus {
    R,
    D,
    S,
}

impl PoliticalStatus {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "R" => Some(Self::R),
            "D" => Some(Self::D),
            "S" => Some(Self::S),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::R => "R",
            Self::D => "D",
            Self::S => "S",
        }
    }
}

impl fmt::Display for PoliticalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One state-year observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRecord {
    pub state: String,
    pub year: i32,
    pub violent_crime: f64,
    pub population: f64,
    pub unemployment_rate: f64,
    pub median_income: f64,
    pub hs_grad_rate: f64,
    pub political_status: PoliticalStatus,
    pub pct_male: f64,
    pub pct_female: f64,
}

/// A rectangular panel: every state carries one record per year of
/// `year_range`. Construction is permissive; [`validate`] reports violations.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    pub records: Vec<PanelRecord>,
    pub states: Vec<String>,
    pub year_range: (i32, i32),
}

impl PanelDataset {
    /// Builds a dataset from records, sorting by (state, year) and deriving
    /// the state list and the global year range.
    pub fn from_records(mut records: Vec<PanelRecord>) -> Self {
        records.sort_by(|a, b| a.state.cmp(&b.state).then(a.year.cmp(&b.year)));
        let mut states: Vec<String> = records.iter().map(|r| r.state.clone()).collect();
        states.dedup();
        let year_range = records
            .iter()
            .map(|r| r.year)
            .fold(None, |acc, y| match acc {
                None => Some((y, y)),
                Some((lo, hi)) => Some((lo.min(y), hi.max(y))),
            })
            .unwrap_or_default();
        Self {
            records,
            states,
            year_range,
        }
    }

    /// Records of one state, in year order. Empty if the state is absent.
    pub fn state_series(&self, state: &str) -> &[PanelRecord] {
        let start = self.records.partition_point(|r| r.state.as_str() < state);
        let end = self.records.partition_point(|r| r.state.as_str() <= state);
        &self.records[start..end]
    }

    pub fn n_years(&self) -> usize {
        (self.year_range.1 - self.year_range.0 + 1).max(0) as usize
    }
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub state: String,
    pub year: i32,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}: {}",
            self.state, self.year, self.field, self.message
        )
    }
}

/// Every violation in a dataset. `is_valid` holds exactly when `errors` is empty.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
    pub is_valid: bool,
}

impl ValidationReport {
    fn new(errors: Vec<ValidationIssue>) -> Self {
        let is_valid = errors.is_empty();
        Self { errors, is_valid }
    }
}

/// Loads a panel CSV. Records come back sorted by (state, year) regardless of
/// file order. Fields are trimmed; numbers use a `.` decimal point.
pub fn load_panel(path: impl AsRef<Path>) -> Result<PanelDataset, PanelError> {
    let path = path.as_ref();
    let io_err = |source| PanelError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => io_err(source),
            other => PanelError::MalformedRow {
                line: 1,
                message: format!("{other:?}"),
            },
        })?;

    let headers = reader.headers().map_err(|e| PanelError::MalformedRow {
        line: 1,
        message: e.to_string(),
    })?;
    let got = headers.iter().collect::<Vec<_>>().join(",");
    if got != CSV_HEADER {
        return Err(PanelError::BadHeader {
            expected: CSV_HEADER.to_string(),
            got,
        });
    }

    let mut records = Vec::new();
    let mut seen: BTreeMap<(String, i32), ()> = BTreeMap::new();
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(PanelError::MalformedRow {
                    line,
                    message: e.to_string(),
                });
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 10 {
            return Err(PanelError::MalformedRow {
                line,
                message: format!("expected 10 columns, got {}", row.len()),
            });
        }
        let field = |idx: usize| row.get(idx).unwrap_or("");
        let number = |idx: usize, name: &str| -> Result<f64, PanelError> {
            field(idx)
                .parse::<f64>()
                .map_err(|_| PanelError::MalformedRow {
                    line,
                    message: format!("cannot parse {name} `{}` as a number", field(idx)),
                })
        };
        let year = field(1)
            .parse::<i32>()
            .map_err(|_| PanelError::MalformedRow {
                line,
                message: format!("cannot parse year `{}` as an integer", field(1)),
            })?;
        let political_status =
            PoliticalStatus::parse(field(7)).ok_or_else(|| PanelError::UnknownPoliticalStatus {
                line,
                value: field(7).to_string(),
            })?;
        let record = PanelRecord {
            state: field(0).to_string(),
            year,
            violent_crime: number(2, "violent_crime")?,
            population: number(3, "population")?,
            unemployment_rate: number(4, "unemployment_rate")?,
            median_income: number(5, "median_income")?,
            hs_grad_rate: number(6, "hs_grad_rate")?,
            political_status,
            pct_male: number(8, "pct_male")?,
            pct_female: number(9, "pct_female")?,
        };
        if seen
            .insert((record.state.clone(), record.year), ())
            .is_some()
        {
            return Err(PanelError::DuplicateStateYear {
                state: record.state,
                year: record.year,
            });
        }
        records.push(record);
    }
    Ok(PanelDataset::from_records(records))
}

/// Writes a dataset in the panel CSV format. `load_panel` of the output
/// reproduces the dataset exactly (f64 values round-trip through Display).
pub fn write_panel(dataset: &PanelDataset, path: impl AsRef<Path>) -> Result<(), PanelError> {
    let path = path.as_ref();
    let io_err = |source| PanelError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &dataset.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.state,
                r.year,
                r.violent_crime,
                r.population,
                r.unemployment_rate,
                r.median_income,
                r.hs_grad_rate,
                r.political_status,
                r.pct_male,
                r.pct_female
            )?;
        }
        w.flush()
    };
    emit().map_err(io_err)
}

fn is_percent(x: f64) -> bool {
    x.is_finite() && (0.0..=100.0).contains(&x)
}

/// Collects every invariant violation. Never stops at the first error.
pub fn validate(dataset: &PanelDataset) -> ValidationReport {
    let mut errors = Vec::new();
    let mut push = |state: &str, year: i32, field: &str, message: String| {
        errors.push(ValidationIssue {
            state: state.to_string(),
            year,
            field: field.to_string(),
            message,
        });
    };

    for r in &dataset.records {
        if r.state.len() != 2 || !r.state.chars().all(|c| c.is_ascii_uppercase()) {
            push(
                &r.state,
                r.year,
                "state",
                "state code must be two uppercase letters".into(),
            );
        }
        if !(r.violent_crime.is_finite() && r.violent_crime >= 0.0) {
            push(
                &r.state,
                r.year,
                "violent_crime",
                "must be a non-negative count".into(),
            );
        }
        if !(r.population.is_finite() && r.population > 0.0) {
            push(
                &r.state,
                r.year,
                "population",
                "must be a positive count".into(),
            );
        }
        if !is_percent(r.unemployment_rate) {
            push(
                &r.state,
                r.year,
                "unemployment_rate",
                "must lie in [0, 100]".into(),
            );
        }
        if !(r.median_income.is_finite() && r.median_income > 0.0) {
            push(&r.state, r.year, "median_income", "must be positive".into());
        }
        if !is_percent(r.hs_grad_rate) {
            push(
                &r.state,
                r.year,
                "hs_grad_rate",
                "must lie in [0, 100]".into(),
            );
        }
        if !is_percent(r.pct_male) {
            push(&r.state, r.year, "pct_male", "must lie in [0, 100]".into());
        }
        if !is_percent(r.pct_female) {
            push(
                &r.state,
                r.year,
                "pct_female",
                "must lie in [0, 100]".into(),
            );
        }
        let gender_sum = r.pct_male + r.pct_female;
        if !gender_sum.is_finite() || (gender_sum - 100.0).abs() > 0.5 {
            push(
                &r.state,
                r.year,
                "pct_male/pct_female",
                format!("pct_male + pct_female = {gender_sum}, must be within 0.5 of 100"),
            );
        }
    }

    // Rectangularity: every state must carry exactly one record for every year
    // of the dataset's range.
    let (first_year, last_year) = dataset.year_range;
    for state in &dataset.states {
        let series = dataset.state_series(state);
        let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
        for r in series {
            *counts.entry(r.year).or_insert(0) += 1;
        }
        for year in first_year..=last_year {
            match counts.get(&year).copied().unwrap_or(0) {
                0 => push(
                    state,
                    year,
                    "year",
                    format!("missing year {year} from [{first_year},{last_year}]"),
                ),
                1 => {}
                n => push(
                    state,
                    year,
                    "year",
                    format!("{n} records for year {year}, expected one"),
                ),
            }
        }
    }

    ValidationReport::new(errors)
}

/// Parameters of the synthetic panel generator. Violent crime is the sum of
/// a systematic part — a per-state trending level shifted linearly by last
/// year's unemployment and by cumulative population growth — and a
/// first-order autoregressive residual with coefficient 0.9. The covariates
/// enter with a one-year lag, so the systematic part of every target year is
/// a function of the preceding records: there is real structure for a
/// forecaster to learn, and naive last-value carry-forward is beatable.
struct StateDynamics {
    level: f64,
    crime_trend: f64,
    cycle_amplitude: f64,
    cycle_phase: f64,
    pop0: f64,
    pop_growth: f64,
    income0: f64,
    base_status: PoliticalStatus,
}

const AR_COEFFICIENT: f64 = 0.9;
/// Crime shift per percentage point of last year's unemployment above 5.0,
/// as a fraction of the state's level.
const UNEMPLOYMENT_EFFECT: f64 = 0.12;
/// Crime shift per unit of cumulative population growth, as a fraction of
/// the state's level.
const POPULATION_EFFECT: f64 = 0.15;
/// Standard deviation of the residual's yearly shock, as a fraction of level.
const CRIME_NOISE: f64 = 0.003;
/// Each state's crime rides a multiplicative cycle (think local reporting
/// waves or boom-bust dynamics) with a state-specific phase. The period
/// matches the default five-year input window, so a sequence always spans
/// one full revolution and the phase is identifiable from its rows.
const CYCLE_PERIOD: f64 = 5.0;

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Generates a rectangular panel of `n_states` states (taken from
/// [`STATE_CODES`] in order) covering `n_years` years from `first_year`.
/// Deterministic given `seed`; output always passes [`validate`].
pub fn synthesize_panel(
    seed: u64,
    n_states: usize,
    first_year: i32,
    n_years: usize,
) -> Result<PanelDataset, PanelError> {
    if n_states == 0 || n_states > STATE_CODES.len() {
        return Err(PanelError::InvalidArgument(format!(
            "n_states must be between 1 and {}, got {n_states}",
            STATE_CODES.len()
        )));
    }
    if n_years == 0 {
        return Err(PanelError::InvalidArgument(
            "n_years must be at least 1".into(),
        ));
    }

    let normal = Normal::<f64>::new(0.0, 1.0).expect("unit normal");
    let mut records = Vec::with_capacity(n_states * n_years);

    for (idx, &state) in STATE_CODES.iter().take(n_states).enumerate() {
        let mut rng = rng::stream(seed, &[tag::SYNTH_STATE, idx as u64]);
        let dyn_ = StateDynamics {
            level: rng.random_range(19_000.0..21_000.0),
            crime_trend: rng.random_range(-0.004..0.005),
            cycle_amplitude: rng.random_range(0.12..0.20),
            cycle_phase: rng.random_range(0.0..std::f64::consts::TAU),
            pop0: rng.random_range(600_000.0..20_000_000.0),
            pop_growth: rng.random_range(-0.002..0.012),
            income0: rng.random_range(38_000.0..75_000.0),
            base_status: match rng.random_range(0.0..1.0) {
                x if x < 0.4 => PoliticalStatus::R,
                x if x < 0.8 => PoliticalStatus::D,
                _ => PoliticalStatus::S,
            },
        };

        let mut unemployment = rng.random_range(3.0..8.0);
        let mut hs_grad = rng.random_range(72.0..93.0);
        let mut status = dyn_.base_status;
        // Stationary draw for the autoregressive residual: its long-run
        // standard deviation is noise/√(1−φ²).
        let resid_sd = CRIME_NOISE * dyn_.level / (1.0 - AR_COEFFICIENT * AR_COEFFICIENT).sqrt();
        let mut resid = resid_sd * normal.sample(&mut rng);

        for t in 0..n_years {
            // Covariates that drive crime enter with a one-year lag, so the
            // systematic part of a year's crime is a function of the
            // previous year's observable record.
            let unemployment_prev = unemployment;
            let population_prev = dyn_.pop0 * (1.0 + dyn_.pop_growth).powi((t as i32 - 1).max(0));
            if t > 0 {
                unemployment = (5.0 + 0.8 * (unemployment - 5.0) + 0.5 * normal.sample(&mut rng))
                    .clamp(2.0, 9.0);
                hs_grad = (hs_grad + 0.4 * normal.sample(&mut rng)).clamp(50.0, 99.0);
                if rng.random_range(0.0..1.0) < 0.08 {
                    status = match rng.random_range(0u32..3) {
                        0 => PoliticalStatus::R,
                        1 => PoliticalStatus::D,
                        _ => PoliticalStatus::S,
                    };
                }
                let level_t = dyn_.level * (1.0 + dyn_.crime_trend).powi(t as i32);
                resid = AR_COEFFICIENT * resid + CRIME_NOISE * level_t * normal.sample(&mut rng);
            }
            let population = dyn_.pop0 * (1.0 + dyn_.pop_growth).powi(t as i32);
            let income =
                dyn_.income0 * 1.02_f64.powi(t as i32) * (1.0 + 0.01 * normal.sample(&mut rng));
            let pct_male = (48.7 + 0.25 * normal.sample(&mut rng)).clamp(45.0, 52.0);
            let level_t = dyn_.level * (1.0 + dyn_.crime_trend).powi(t as i32);
            let cycle = 1.0
                + dyn_.cycle_amplitude
                    * (std::f64::consts::TAU * t as f64 / CYCLE_PERIOD + dyn_.cycle_phase).sin();
            let systematic = level_t
                * cycle
                * (1.0
                    + UNEMPLOYMENT_EFFECT * (unemployment_prev - 5.0)
                    + POPULATION_EFFECT * (population_prev / dyn_.pop0 - 1.0));
            let crime = (systematic + resid).max(0.0);

            let pct_male = round2(pct_male);
            records.push(PanelRecord {
                state: state.to_string(),
                year: first_year + t as i32,
                violent_crime: crime.round(),
                population: population.round().max(1.0),
                unemployment_rate: round2(unemployment),
                median_income: round2(income.max(1_000.0)),
                hs_grad_rate: round2(hs_grad),
                political_status: status,
                pct_male,
                pct_female: 100.0 - pct_male,
            });
        }
    }

    Ok(PanelDataset::from_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_row_file() -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{CSV_HEADER}").unwrap();
        writeln!(f, "WY,2018,1200,577000,4.1,61000,92.3,R,49.8,50.2").unwrap();
        writeln!(f, "WY,2019,1258,578000,3.9,62000,92.5,R,49.9,50.1").unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_minimal_wellformed_file() {
        let f = two_row_file();
        let ds = load_panel(f.path()).unwrap();
        assert_eq!(ds.states, vec!["WY"]);
        assert_eq!(ds.year_range, (2018, 2019));
        assert_eq!(ds.records.len(), 2);
        assert_eq!(ds.records[1].violent_crime, 1258.0);
        assert_eq!(ds.records[0].political_status, PoliticalStatus::R);
    }

    #[test]
    fn load_reports_parse_failure_with_line_number() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{CSV_HEADER}").unwrap();
        writeln!(f, "WY,2018,1200,577000,4.1,61000,92.3,R,49.8,50.2").unwrap();
        writeln!(f, "WY,2019,1258,578000,3.9,62000,92.5,R,xyz,50.1").unwrap();
        f.flush().unwrap();
        match load_panel(f.path()) {
            Err(PanelError::MalformedRow { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("pct_male"), "{message}");
            }
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_bad_column_count() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{CSV_HEADER}").unwrap();
        writeln!(f, "WY,2018,1200").unwrap();
        f.flush().unwrap();
        assert!(matches!(
            load_panel(f.path()),
            Err(PanelError::MalformedRow { .. })
        ));
    }

    #[test]
    fn load_rejects_unknown_political_status() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{CSV_HEADER}").unwrap();
        writeln!(f, "WY,2018,1200,577000,4.1,61000,92.3,Q,49.8,50.2").unwrap();
        f.flush().unwrap();
        match load_panel(f.path()) {
            Err(PanelError::UnknownPoliticalStatus { line, value }) => {
                assert_eq!(line, 2);
                assert_eq!(value, "Q");
            }
            other => panic!("expected UnknownPoliticalStatus, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_duplicate_state_year() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{CSV_HEADER}").unwrap();
        writeln!(f, "WY,2018,1200,577000,4.1,61000,92.3,R,49.8,50.2").unwrap();
        writeln!(f, "WY,2018,1300,577000,4.1,61000,92.3,R,49.8,50.2").unwrap();
        f.flush().unwrap();
        assert!(matches!(
            load_panel(f.path()),
            Err(PanelError::DuplicateStateYear { year: 2018, .. })
        ));
    }

    #[test]
    fn load_rejects_wrong_header() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "state,year,crime").unwrap();
        f.flush().unwrap();
        assert!(matches!(
            load_panel(f.path()),
            Err(PanelError::BadHeader { .. })
        ));
    }

    #[test]
    fn roundtrip_full_synthetic_panel() {
        let ds = synthesize_panel(11, 50, 2000, 20).unwrap();
        assert_eq!(ds.records.len(), 1000);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        write_panel(&ds, &path).unwrap();
        let back = load_panel(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn load_is_row_order_insensitive() {
        let ds = synthesize_panel(3, 4, 2005, 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        write_panel(&ds, &path).unwrap();

        // Reverse the data rows and reload.
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[1..].reverse();
        let shuffled = dir.path().join("shuffled.csv");
        std::fs::write(&shuffled, lines.join("\n") + "\n").unwrap();

        assert_eq!(load_panel(&path).unwrap(), load_panel(&shuffled).unwrap());
    }

    #[test]
    fn validate_accepts_valid_dataset() {
        let ds = synthesize_panel(7, 5, 2000, 10).unwrap();
        let report = validate(&ds);
        assert!(report.is_valid, "unexpected errors: {:?}", report.errors);
        assert!(report.errors.is_empty());
    }

    #[test]
    fn validate_flags_gender_sum() {
        let mut ds = synthesize_panel(7, 1, 2000, 3).unwrap();
        ds.records[1].pct_male = 60.0;
        ds.records[1].pct_female = 60.0;
        let report = validate(&ds);
        assert!(!report.is_valid);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].field, "pct_male/pct_female");
        assert!(report.errors[0].message.contains("within 0.5 of 100"));
    }

    #[test]
    fn validate_flags_missing_year() {
        let ds = synthesize_panel(7, 1, 2000, 20).unwrap();
        let records: Vec<PanelRecord> = ds.records.into_iter().filter(|r| r.year != 2010).collect();
        let ds = PanelDataset::from_records(records);
        let report = validate(&ds);
        assert_eq!(report.errors.len(), 1);
        let issue = &report.errors[0];
        assert_eq!((issue.state.as_str(), issue.year), ("AL", 2010));
        assert!(issue.message.contains("missing year 2010"));
        assert!(issue.message.contains("[2000,2019]"));
    }

    #[test]
    fn validate_flags_out_of_range_fields() {
        let mut ds = synthesize_panel(7, 2, 2000, 2).unwrap();
        ds.records[0].violent_crime = -5.0;
        ds.records[1].population = 0.0;
        ds.records[2].unemployment_rate = 130.0;
        let report = validate(&ds);
        let fields: Vec<&str> = report.errors.iter().map(|e| e.field.as_str()).collect();
        assert!(fields.contains(&"violent_crime"));
        assert!(fields.contains(&"population"));
        assert!(fields.contains(&"unemployment_rate"));
    }

    #[test]
    fn synthesize_is_deterministic() {
        let a = synthesize_panel(7, 3, 2000, 20).unwrap();
        let b = synthesize_panel(7, 3, 2000, 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthesize_is_seed_sensitive() {
        let a = synthesize_panel(7, 3, 2000, 20).unwrap();
        let b = synthesize_panel(8, 3, 2000, 20).unwrap();
        assert!(
            a.records
                .iter()
                .zip(&b.records)
                .any(|(x, y)| x.violent_crime != y.violent_crime),
            "different seeds must change at least one violent_crime value"
        );
    }

    #[test]
    fn synthesize_rejects_bad_sizes() {
        assert!(matches!(
            synthesize_panel(1, 51, 2000, 5),
            Err(PanelError::InvalidArgument(_))
        ));
        assert!(matches!(
            synthesize_panel(1, 0, 2000, 5),
            Err(PanelError::InvalidArgument(_))
        ));
        assert!(matches!(
            synthesize_panel(1, 3, 2000, 0),
            Err(PanelError::InvalidArgument(_))
        ));
    }

    #[test]
    fn synthetic_output_always_validates() {
        for (seed, n_states, first_year, n_years) in [
            (0, 1, 1999, 1),
            (1, 3, 2000, 21),
            (42, 50, 2000, 20),
            (9, 12, 1980, 5),
        ] {
            let ds = synthesize_panel(seed, n_states, first_year, n_years).unwrap();
            assert_eq!(ds.records.len(), n_states * n_years);
            let report = validate(&ds);
            assert!(report.is_valid, "seed {seed}: {:?}", report.errors);
        }
    }

    #[test]
    fn state_series_slices_by_state() {
        let ds = synthesize_panel(7, 3, 2000, 4).unwrap();
        let ak = ds.state_series("AK");
        assert_eq!(ak.len(), 4);
        assert!(ak.iter().all(|r| r.state == "AK"));
        assert!(ds.state_series("ZZ").is_empty());
    }
}
