//! Partial-correlation testing for repeatedly observed vectorial timeseries.
//!
//! Given N independent experiments that each record three series x, y, z over
//! a common timeline, the test asks whether y can be predicted from x beyond
//! what the confounder z explains. It makes no stationarity or linearity
//! assumptions about the series themselves; it relies only on the experiments
//! being independent repetitions.
//!
//! For every pair of experiments (i, j), y_i is residualized against the
//! confounders of *both* experiments and scored against x_i and against x_j
//! with a pluggable association measure. The per-experiment statistic G_i is
//! the average same-experiment advantage; under the null its values are
//! exchangeable with mean zero, so a one-sample t-test applies (with a
//! symmetry diagnostic, since the G values need not be Gaussian).
//!
//! The crate provides the data model and validation ([`model`]), implicit
//! projection via orthonormal bases ([`projection`]), built-in association
//! measures ([`association`]), the test engine and report ([`engine`]),
//! scenario/null generators and Monte Carlo calibration ([`simulate`]), and
//! CSV/manifest/report I/O ([`io`]), with a `parcorr` binary offering
//! `test`, `simulate`, and `calibrate` subcommands on top.

pub mod association;
pub mod engine;
pub mod error;
pub mod io;
pub mod model;
pub mod projection;
pub mod simulate;
pub mod stats;

pub use association::{apply_rho, rho_pearson, rho_r2, RhoKind, RhoMeasure};
pub use engine::{
    g_statistics, pair_tables, run_test, symmetry_diagnostics, t_test, DegeneratePolicy,
    PairTables, ProjectionMode, Sided, TestConfig, TestReport,
};
pub use error::{Error, Result, Violation};
pub use model::{validate_dataset, Dataset, Experiment, SeriesMatrix, ValidationReport};
pub use projection::{
    joint_residualize, orthonormal_basis, residualize, OrthonormalBasis, DEFAULT_BASIS_TOL,
};
pub use simulate::{
    gen_null, gen_scenario, monte_carlo, naive_pearson_p, CalibrationResult, DataGen,
    NullGenConfig, NullGenerator, Scenario, ScenarioConfig,
};
