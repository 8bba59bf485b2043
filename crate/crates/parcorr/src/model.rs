//! Dataset model: per-experiment series matrices and structural validation.
//!
//! Each experiment observes three series over a common timeline: a predictor
//! block `x`, a target block `y`, and a (possibly empty) confounder block `z`.
//! Validation is collected, not thrown, so every problem in a dataset can be
//! reported at once.

use nalgebra::DMatrix;

use crate::error::Violation;

/// Minimum number of experiments accepted by the test (the t statistic needs
/// at least two degrees of freedom).
pub const MIN_EXPERIMENTS: usize = 3;

/// Fewer experiments than this triggers a reliability warning.
pub const SMALL_N_WARNING: usize = 8;

/// One variable of one experiment: rows are timepoints, columns are
/// dimensions. A zero-column matrix is a valid "no data" placeholder for
/// confounders.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix {
    values: DMatrix<f64>,
}

impl SeriesMatrix {
    pub fn new(values: DMatrix<f64>) -> Self {
        SeriesMatrix { values }
    }

    /// A t_len x 0 matrix, used when an experiment has no confounder.
    pub fn empty(t_len: usize) -> Self {
        SeriesMatrix {
            values: DMatrix::zeros(t_len, 0),
        }
    }

    /// Builds from row-major data; rows must all have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let t = rows.len();
        let k = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != k) {
            return None;
        }
        Some(SeriesMatrix {
            values: DMatrix::from_fn(t, k, |i, j| rows[i][j]),
        })
    }

    pub fn t_len(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.t_len())
            .map(|i| (0..self.n_cols()).map(|j| self.values[(i, j)]).collect())
            .collect()
    }
}

impl From<DMatrix<f64>> for SeriesMatrix {
    fn from(values: DMatrix<f64>) -> Self {
        SeriesMatrix::new(values)
    }
}

/// One repetition of the experiment: x (T x p), y (T x q), z (T x r, r >= 0).
#[derive(Debug, Clone)]
pub struct Experiment {
    pub x: SeriesMatrix,
    pub y: SeriesMatrix,
    pub z: SeriesMatrix,
    pub label: String,
}

impl Experiment {
    pub fn new(
        x: SeriesMatrix,
        y: SeriesMatrix,
        z: SeriesMatrix,
        label: impl Into<String>,
    ) -> Self {
        Experiment {
            x,
            y,
            z,
            label: label.into(),
        }
    }

    pub fn t_len(&self) -> usize {
        self.x.t_len()
    }
}

/// An ordered collection of experiments sharing a common number of timepoints.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub experiments: Vec<Experiment>,
}

impl Dataset {
    pub fn new(experiments: Vec<Experiment>) -> Self {
        Dataset { experiments }
    }

    pub fn n(&self) -> usize {
        self.experiments.len()
    }

    pub fn t_len(&self) -> usize {
        self.experiments.first().map_or(0, |e| e.t_len())
    }
}

/// Outcome of structural validation: hard violations plus advisory warnings.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural invariant a dataset must satisfy before the
/// numerics run. Pure: identical inputs yield identical reports.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut violation = |label: Option<&str>, rule: String| {
        report.violations.push(Violation {
            label: label.map(|s| s.to_string()),
            rule,
        });
    };

    if d.n() < MIN_EXPERIMENTS {
        violation(
            None,
            format!("N below minimum {MIN_EXPERIMENTS} (got {})", d.n()),
        );
    }

    for exp in &d.experiments {
        let label = Some(exp.label.as_str());
        let t = exp.x.t_len();
        if exp.y.t_len() != t || exp.z.t_len() != t {
            violation(
                label,
                format!(
                    "t_len mismatch within experiment (x={}, y={}, z={})",
                    t,
                    exp.y.t_len(),
                    exp.z.t_len()
                ),
            );
        }
        if t < 2 {
            violation(label, format!("t_len must be at least 2 (got {t})"));
        }
        if exp.x.n_cols() < 1 {
            violation(label, "x must have at least one column".to_string());
        }
        if exp.y.n_cols() < 1 {
            violation(label, "y must have at least one column".to_string());
        }
        for (name, series) in [("x", &exp.x), ("y", &exp.y), ("z", &exp.z)] {
            if !series.is_finite() {
                violation(label, format!("non-finite value in {name}"));
            }
        }
    }

    if let Some(first) = d.experiments.first() {
        let t0 = first.t_len();
        let offenders: Vec<&str> = d
            .experiments
            .iter()
            .filter(|e| e.t_len() != t0)
            .map(|e| e.label.as_str())
            .collect();
        if !offenders.is_empty() {
            violation(
                None,
                format!(
                    "t_len mismatch across experiments (expected {t0}, offending: {})",
                    offenders.join(", ")
                ),
            );
        }
    }

    if d.n() >= MIN_EXPERIMENTS && d.n() < SMALL_N_WARNING {
        report.warnings.push(format!(
            "only {} experiments; the t-test on so few G values is unreliable (N < {})",
            d.n(),
            SMALL_N_WARNING
        ));
    }

    report
}
