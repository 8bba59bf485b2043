//! The test engine: pairwise association tables, per-experiment G statistics,
//! the t-test on their mean, and symmetry diagnostics.
//!
//! For experiments i and j, the target of comparison is the residual of Y_i
//! after projecting out the confounders of *both* experiments. The engine
//! also provides the deliberately invalid variant that projects only the
//! experiment's own confounder, kept for demonstrating why the joint
//! projection is necessary.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{apply_rho, RhoKind, RhoMeasure};
use crate::error::{Error, Result};
use crate::model::{validate_dataset, Dataset};
use crate::projection::{hstack, orthonormal_basis, residualize, DEFAULT_BASIS_TOL};
use crate::stats;

/// How the confounders are projected out of Y_i for the (i, j) comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Project out both Z_i and Z_j (the correct test).
    ValidJoint,
    /// Project out only Z_i. Biased; produces spurious negative statistics.
    InvalidSingle,
}

/// Policy when an association value is undefined because a series or a
/// residual is numerically constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegeneratePolicy {
    /// Abort with an error naming the offending experiment pair (default).
    Abort,
    /// Record 0 for the offending value and continue.
    SubstituteZero,
}

/// Sidedness of the final t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sided {
    TwoSided,
    Greater,
    Less,
}

#[derive(Debug, Clone)]
pub struct TestConfig {
    pub measure: RhoMeasure,
    pub mode: ProjectionMode,
    /// Append an all-ones column to every confounder block before projecting,
    /// so mean offsets are always removed alongside the confounder.
    pub project_intercept: bool,
    pub degenerate_policy: DegeneratePolicy,
    pub sided: Sided,
    pub basis_tol: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            measure: RhoMeasure::pearson(),
            mode: ProjectionMode::ValidJoint,
            project_intercept: true,
            degenerate_policy: DegeneratePolicy::Abort,
            sided: Sided::TwoSided,
            basis_tol: DEFAULT_BASIS_TOL,
        }
    }
}

/// The two N x N association tables.
///
/// `a[(i, j)]` scores Y_i's residual against X_i; `b[(i, j)]` scores the same
/// residual against X_j. The diagonal entries of the two tables are equal by
/// construction.
#[derive(Debug, Clone)]
pub struct PairTables {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub mode: ProjectionMode,
}

/// Everything the test produces, in report form.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub g: Vec<f64>,
    pub t_stat: f64,
    pub df: usize,
    pub p_value: f64,
    pub skewness: f64,
    pub qq_points: Vec<(f64, f64)>,
    pub mode: ProjectionMode,
    pub rho: RhoMeasure,
    pub n: usize,
    pub t_len: usize,
    pub warnings: Vec<String>,
}

/// Runs `f` inside the pool sized by `PARCORR_THREADS`, or inline with the
/// default rayon pool when the variable is unset.
fn run_parallel<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    let pool = POOL.get_or_init(|| {
        std::env::var("PARCORR_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .map(|n| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .expect("failed to build thread pool")
            })
    });
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn confounder_matrix(z: &DMatrix<f64>, add_intercept: bool, t: usize) -> DMatrix<f64> {
    if add_intercept {
        hstack(&DMatrix::from_element(t, 1, 1.0), z)
    } else {
        z.clone()
    }
}

/// Residual considered numerically zero relative to its source: the
/// association against it would be noise, so it is flagged as degenerate
/// before any measure sees it.
fn residual_is_degenerate(resid: &DMatrix<f64>, y: &DMatrix<f64>) -> bool {
    resid.norm() <= 1e-12 * y.norm()
}

fn rho_with_policy(
    measure: &RhoMeasure,
    policy: DegeneratePolicy,
    x: &DMatrix<f64>,
    resid: &DMatrix<f64>,
    resid_degenerate: bool,
    context: impl Fn() -> String,
) -> Result<f64> {
    if resid_degenerate {
        return match policy {
            DegeneratePolicy::SubstituteZero => Ok(0.0),
            DegeneratePolicy::Abort => Err(Error::DegenerateSeries(format!(
                "{}: residual is numerically zero (confounders explain Y completely)",
                context()
            ))),
        };
    }
    match apply_rho(measure, x, resid) {
        Err(Error::DegenerateSeries(msg)) => match policy {
            DegeneratePolicy::SubstituteZero => Ok(0.0),
            DegeneratePolicy::Abort => {
                Err(Error::DegenerateSeries(format!("{}: {msg}", context())))
            }
        },
        other => other,
    }
}

struct CellValues {
    i: usize,
    j: usize,
    a: f64,
    b: f64,
}

/// Fills the two association tables for every ordered pair of experiments,
/// including the diagonal.
///
/// Requires a dataset that passed [`validate_dataset`]. The joint basis is
/// built once per unordered pair (it is symmetric in i and j) and reused for
/// both orderings; within a pair the confounders are always stacked in
/// (min, max) index order so recomputations are bit-reproducible.
pub fn pair_tables(d: &Dataset, cfg: &TestConfig) -> Result<PairTables> {
    let n = d.n();
    let t = d.t_len();
    let zc: Vec<DMatrix<f64>> = d
        .experiments
        .iter()
        .map(|e| confounder_matrix(e.z.values(), cfg.project_intercept, t))
        .collect();

    let cells: Result<Vec<Vec<CellValues>>> = match cfg.mode {
        ProjectionMode::ValidJoint => {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i..n).map(move |j| (i, j)))
                .collect();
            run_parallel(|| {
                pairs
                    .par_iter()
                    .map(|&(i, j)| valid_pair_cells(d, &zc, i, j, cfg))
                    .collect()
            })
        }
        ProjectionMode::InvalidSingle => run_parallel(|| {
            (0..n)
                .into_par_iter()
                .map(|i| invalid_row_cells(d, &zc, i, cfg))
                .collect()
        }),
    };

    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for cell in cells?.into_iter().flatten() {
        a[(cell.i, cell.j)] = cell.a;
        b[(cell.i, cell.j)] = cell.b;
    }
    Ok(PairTables { a, b, mode: cfg.mode })
}

fn valid_pair_cells(
    d: &Dataset,
    zc: &[DMatrix<f64>],
    i: usize,
    j: usize,
    cfg: &TestConfig,
) -> Result<Vec<CellValues>> {
    let ei = &d.experiments[i];
    let ej = &d.experiments[j];
    let ctx = |whose_x: &str| {
        format!(
            "pair ({}, {}), rho(X_{whose_x}; residual)",
            ei.label, ej.label
        )
    };

    // Shared projector for the unordered pair; the diagonal reuses the
    // single-block basis since stacking a block with itself adds no span.
    let basis = if i == j {
        orthonormal_basis(&zc[i], cfg.basis_tol)
    } else {
        orthonormal_basis(&hstack(&zc[i], &zc[j]), cfg.basis_tol)
    };

    let resid_i = residualize(ei.y.values(), &basis)?;
    let deg_i = residual_is_degenerate(&resid_i, ei.y.values());

    if i == j {
        let v = rho_with_policy(
            &cfg.measure,
            cfg.degenerate_policy,
            ei.x.values(),
            &resid_i,
            deg_i,
            || ctx("i"),
        )?;
        return Ok(vec![CellValues { i, j, a: v, b: v }]);
    }

    let a_ij = rho_with_policy(
        &cfg.measure,
        cfg.degenerate_policy,
        ei.x.values(),
        &resid_i,
        deg_i,
        || ctx("i"),
    )?;
    let b_ij = rho_with_policy(
        &cfg.measure,
        cfg.degenerate_policy,
        ej.x.values(),
        &resid_i,
        deg_i,
        || ctx("j"),
    )?;

    let resid_j = residualize(ej.y.values(), &basis)?;
    let deg_j = residual_is_degenerate(&resid_j, ej.y.values());
    let a_ji = rho_with_policy(
        &cfg.measure,
        cfg.degenerate_policy,
        ej.x.values(),
        &resid_j,
        deg_j,
        || ctx("j"),
    )?;
    let b_ji = rho_with_policy(
        &cfg.measure,
        cfg.degenerate_policy,
        ei.x.values(),
        &resid_j,
        deg_j,
        || ctx("i"),
    )?;

    Ok(vec![
        CellValues {
            i,
            j,
            a: a_ij,
            b: b_ij,
        },
        CellValues {
            i: j,
            j: i,
            a: a_ji,
            b: b_ji,
        },
    ])
}

fn invalid_row_cells(
    d: &Dataset,
    zc: &[DMatrix<f64>],
    i: usize,
    cfg: &TestConfig,
) -> Result<Vec<CellValues>> {
    let ei = &d.experiments[i];
    let basis = orthonormal_basis(&zc[i], cfg.basis_tol);
    let resid_i = residualize(ei.y.values(), &basis)?;
    let deg_i = residual_is_degenerate(&resid_i, ei.y.values());

    // The residual depends only on i here, so rho(X_i; .) is shared by the
    // whole row, including the diagonal.
    let a_val = rho_with_policy(
        &cfg.measure,
        cfg.degenerate_policy,
        ei.x.values(),
        &resid_i,
        deg_i,
        || format!("pair ({0}, {0}), rho(X_i; residual)", ei.label),
    )?;

    let mut out = Vec::with_capacity(d.n());
    for j in 0..d.n() {
        let b_ij = if j == i {
            a_val
        } else {
            let ej = &d.experiments[j];
            rho_with_policy(
                &cfg.measure,
                cfg.degenerate_policy,
                ej.x.values(),
                &resid_i,
                deg_i,
                || format!("pair ({}, {}), rho(X_j; residual)", ei.label, ej.label),
            )?
        };
        out.push(CellValues {
            i,
            j,
            a: a_val,
            b: b_ij,
        });
    }
    Ok(out)
}

/// G_i = (1/N) * sum_j (a[i][j] - b[i][j]); the j = i term is included and
/// contributes exactly zero, so the divisor is N.
pub fn g_statistics(tables: &PairTables) -> Vec<f64> {
    let n = tables.a.nrows();
    (0..n)
        .map(|i| {
            let mut sum = 0.0;
            for j in 0..n {
                sum += tables.a[(i, j)] - tables.b[(i, j)];
            }
            sum / n as f64
        })
        .collect()
}

/// Outcome of the one-sample t-test on the G values.
#[derive(Debug, Clone)]
pub struct TTestResult {
    pub t_stat: f64,
    pub df: usize,
    pub p_value: f64,
    pub warnings: Vec<String>,
}

/// Below this absolute scale the G values are treated as all-zero: the
/// figure-style noiseless scenarios produce G values that are zero up to
/// rounding, and a t statistic formed from pure rounding noise would be
/// meaningless.
const G_ZERO_SCALE: f64 = 1e-9;

/// One-sample t-test that the mean of `g` is zero.
///
/// Degenerate inputs (zero sample variance, which noiseless simulations
/// produce) never panic: the p-value is forced to 0 when the mean is clearly
/// nonzero and to 1 when the mean is zero too, with a warning either way.
pub fn t_test(g: &[f64], sided: Sided) -> TTestResult {
    assert!(g.len() >= 3, "t_test needs at least 3 values");
    let n = g.len();
    let df = n - 1;
    let m = stats::mean(g);
    let s = stats::sample_sd(g);

    let degenerate =
        s == 0.0 || (m.abs() <= G_ZERO_SCALE && s <= G_ZERO_SCALE) || s <= 1e-12 * m.abs();
    if degenerate {
        let warnings =
            vec!["zero-variance G (degenerate, likely noiseless simulation)".to_string()];
        let mean_is_zero = m.abs() <= G_ZERO_SCALE;
        let p_value = if mean_is_zero {
            1.0
        } else {
            match sided {
                Sided::TwoSided => 0.0,
                Sided::Greater => {
                    if m > 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                }
                Sided::Less => {
                    if m < 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                }
            }
        };
        return TTestResult {
            t_stat: 0.0,
            df,
            p_value,
            warnings,
        };
    }

    let t_stat = m / (s / (n as f64).sqrt());
    let p_value = match sided {
        Sided::TwoSided => stats::student_t_two_sided_p(t_stat, df as f64),
        Sided::Greater => 1.0 - stats::student_t_cdf(t_stat, df as f64),
        Sided::Less => stats::student_t_cdf(t_stat, df as f64),
    };
    TTestResult {
        t_stat,
        df,
        p_value,
        warnings: Vec::new(),
    }
}

/// Skewness of the G values plus QQ points against the standard normal.
///
/// QQ points pair the sorted G values with normal quantiles at probabilities
/// (k - 0.5)/N. A |skewness| above 1 attaches a warning, since the t-test's
/// justification leans on near-symmetry.
pub fn symmetry_diagnostics(g: &[f64]) -> (f64, Vec<(f64, f64)>, Vec<String>) {
    assert!(g.len() >= 3, "diagnostics need at least 3 values");
    let n = g.len();
    let mut warnings = Vec::new();

    let (m2, m3) = stats::central_moments_2_3(g);
    let scale = g.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let skewness = if m2 <= (1e-24 * scale * scale).max(f64::MIN_POSITIVE) {
        warnings.push("zero-variance G: skewness undefined, reported as 0".to_string());
        0.0
    } else {
        m3 / m2.powf(1.5)
    };
    if skewness.abs() > 1.0 {
        warnings.push(format!(
            "G skewness {skewness:.3} exceeds 1.0; inspect the QQ points before trusting the t-test"
        ));
    }

    let mut sorted = g.to_vec();
    sorted.sort_by(f64::total_cmp);
    let qq_points = sorted
        .iter()
        .enumerate()
        .map(|(k, &emp)| {
            let prob = (k as f64 + 0.5) / n as f64;
            (stats::normal_quantile(prob), emp)
        })
        .collect();

    (skewness, qq_points, warnings)
}

/// End-to-end test: validation, pair tables, G statistics, t-test, and
/// diagnostics, assembled into a report. Deterministic given inputs and
/// configuration.
pub fn run_test(d: &Dataset, cfg: &TestConfig) -> Result<TestReport> {
    let validation = validate_dataset(d);
    if !validation.is_ok() {
        return Err(Error::Validation(validation.violations));
    }
    if cfg.measure.kind == RhoKind::Pearson1d {
        for e in &d.experiments {
            if e.x.n_cols() != 1 || e.y.n_cols() != 1 {
                return Err(Error::Config(format!(
                    "pearson1d needs 1-dimensional x and y, but experiment {} has p={}, q={}",
                    e.label,
                    e.x.n_cols(),
                    e.y.n_cols()
                )));
            }
        }
    }

    let tables = pair_tables(d, cfg)?;
    let g = g_statistics(&tables);
    let ttest = t_test(&g, cfg.sided);
    let (skewness, qq_points, sym_warnings) = symmetry_diagnostics(&g);

    let mut warnings = validation.warnings;
    warnings.extend(ttest.warnings);
    warnings.extend(sym_warnings);

    Ok(TestReport {
        g,
        t_stat: ttest.t_stat,
        df: ttest.df,
        p_value: ttest.p_value,
        skewness,
        qq_points,
        mode: cfg.mode,
        rho: cfg.measure.clone(),
        n: d.n(),
        t_len: d.t_len(),
        warnings,
    })
}
