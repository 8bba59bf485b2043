//! Python bindings for the partial-correlation test.
//!
//! The module exposes the main operations on plain Python data: series are
//! lists of rows (one list of floats per timepoint), reports and calibration
//! results come back as dicts mirroring the CLI's JSON schema.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use parcorr::engine::{DegeneratePolicy, ProjectionMode, TestConfig};
use parcorr::simulate::{
    gen_null, gen_scenario, monte_carlo, scenario_engine_config, DataGen, NullGenConfig,
    NullGenerator, Scenario, ScenarioConfig,
};
use parcorr::{run_test, Dataset, Experiment, RhoMeasure, SeriesMatrix};

fn to_py_err(e: parcorr::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None().into_bound(py),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64()
                    .ok_or_else(|| PyValueError::new_err("unrepresentable number"))?
                    .into_pyobject(py)?
                    .into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyValueError::new_err(format!("serialization failed: {e}")))?;
    json_to_py(py, &json)
}

fn series_from_rows(rows: Vec<Vec<f64>>, what: &str) -> PyResult<SeriesMatrix> {
    SeriesMatrix::from_rows(&rows)
        .ok_or_else(|| PyValueError::new_err(format!("{what}: rows have inconsistent lengths")))
}

fn dataset_from_lists(
    x: Vec<Vec<Vec<f64>>>,
    y: Vec<Vec<Vec<f64>>>,
    z: Option<Vec<Vec<Vec<f64>>>>,
    labels: Option<Vec<String>>,
) -> PyResult<Dataset> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err(format!(
            "x and y must list the same number of experiments ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if let Some(z) = &z {
        if z.len() != x.len() {
            return Err(PyValueError::new_err(
                "z must list one entry per experiment (use None rows for no confounder)",
            ));
        }
    }
    let mut experiments = Vec::with_capacity(x.len());
    for (i, (xi, yi)) in x.into_iter().zip(y).enumerate() {
        let label = labels
            .as_ref()
            .and_then(|l| l.get(i).cloned())
            .unwrap_or_else(|| format!("exp{:02}", i + 1));
        let xm = series_from_rows(xi, "x")?;
        let ym = series_from_rows(yi, "y")?;
        let zm = match &z {
            Some(zs) => {
                let rows = &zs[i];
                if rows.is_empty() || rows[0].is_empty() {
                    SeriesMatrix::empty(xm.t_len())
                } else {
                    series_from_rows(rows.clone(), "z")?
                }
            }
            None => SeriesMatrix::empty(xm.t_len()),
        };
        experiments.push(Experiment::new(xm, ym, zm, label));
    }
    Ok(Dataset::new(experiments))
}

fn measure_from_name(rho: &str, ridge_lambda: f64, add_intercept: bool) -> PyResult<RhoMeasure> {
    let mut measure = match rho {
        "pearson" => RhoMeasure::pearson(),
        "linreg" => RhoMeasure::linreg(),
        "ridge" => RhoMeasure::ridge(ridge_lambda),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown rho {other:?} (expected pearson, linreg, or ridge)"
            )))
        }
    };
    measure.add_intercept = add_intercept;
    Ok(measure)
}

fn scenario_from_name(name: &str) -> PyResult<Scenario> {
    match name {
        "fig1" => Ok(Scenario::Fig1),
        "fig2" => Ok(Scenario::Fig2),
        "fig3" => Ok(Scenario::Fig3),
        other => Err(PyValueError::new_err(format!(
            "unknown scenario {other:?} (expected fig1, fig2, or fig3)"
        ))),
    }
}

fn engine_config(
    rho: &str,
    ridge_lambda: f64,
    add_intercept: bool,
    invalid_variant: bool,
    degenerate_rho_zero: bool,
) -> PyResult<TestConfig> {
    Ok(TestConfig {
        measure: measure_from_name(rho, ridge_lambda, add_intercept)?,
        mode: if invalid_variant {
            ProjectionMode::InvalidSingle
        } else {
            ProjectionMode::ValidJoint
        },
        project_intercept: add_intercept,
        degenerate_policy: if degenerate_rho_zero {
            DegeneratePolicy::SubstituteZero
        } else {
            DegeneratePolicy::Abort
        },
        ..TestConfig::default()
    })
}

/// Run the partial-correlation test on per-experiment series given as lists
/// of rows. Returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (x, y, z=None, labels=None, rho="pearson", ridge_lambda=1.0,
                    add_intercept=true, invalid_variant=false, degenerate_rho_zero=false))]
#[allow(clippy::too_many_arguments)]
fn run_partial_correlation_test<'py>(
    py: Python<'py>,
    x: Vec<Vec<Vec<f64>>>,
    y: Vec<Vec<Vec<f64>>>,
    z: Option<Vec<Vec<Vec<f64>>>>,
    labels: Option<Vec<String>>,
    rho: &str,
    ridge_lambda: f64,
    add_intercept: bool,
    invalid_variant: bool,
    degenerate_rho_zero: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let dataset = dataset_from_lists(x, y, z, labels)?;
    let cfg = engine_config(rho, ridge_lambda, add_intercept, invalid_variant, degenerate_rho_zero)?;
    let report = run_test(&dataset, &cfg).map_err(to_py_err)?;
    serialize_to_py(py, &report)
}

/// Generate a figure scenario dataset; returns {"x", "y", "z", "labels"}
/// with series as lists of rows.
#[pyfunction]
#[pyo3(signature = (scenario, n=10, t_len=100, pulse_width=5, noise_sd=0.0, seed=0))]
fn generate_scenario<'py>(
    py: Python<'py>,
    scenario: &str,
    n: usize,
    t_len: usize,
    pulse_width: usize,
    noise_sd: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ScenarioConfig {
        scenario: scenario_from_name(scenario)?,
        n,
        t_len,
        pulse_width,
        noise_sd,
        seed,
    };
    let dataset = gen_scenario(&cfg).map_err(to_py_err)?;
    dataset_to_dict(py, &dataset)
}

/// Generate an autocorrelated null dataset (the null holds by construction).
#[pyfunction]
#[pyo3(signature = (generator="ar1", ar_coeff=0.9, n=10, t_len=100, dims=(1, 1, 1),
                    w_scale=1.0, x_z_coupling=0.7, seed=0))]
#[allow(clippy::too_many_arguments)]
fn generate_null<'py>(
    py: Python<'py>,
    generator: &str,
    ar_coeff: f64,
    n: usize,
    t_len: usize,
    dims: (usize, usize, usize),
    w_scale: f64,
    x_z_coupling: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let generator = match generator {
        "ar1" => NullGenerator::Ar1 { ar_coeff },
        "randomwalk" => NullGenerator::RandomWalk,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown generator {other:?} (expected ar1 or randomwalk)"
            )))
        }
    };
    let cfg = NullGenConfig {
        generator,
        n,
        t_len,
        dims,
        w_scale,
        x_z_coupling,
        seed,
    };
    let dataset = gen_null(&cfg).map_err(to_py_err)?;
    dataset_to_dict(py, &dataset)
}

fn dataset_to_dict<'py>(py: Python<'py>, dataset: &Dataset) -> PyResult<Bound<'py, PyAny>> {
    let dict = PyDict::new(py);
    let xs: Vec<Vec<Vec<f64>>> = dataset.experiments.iter().map(|e| e.x.to_rows()).collect();
    let ys: Vec<Vec<Vec<f64>>> = dataset.experiments.iter().map(|e| e.y.to_rows()).collect();
    let zs: Vec<Vec<Vec<f64>>> = dataset.experiments.iter().map(|e| e.z.to_rows()).collect();
    let labels: Vec<String> = dataset
        .experiments
        .iter()
        .map(|e| e.label.clone())
        .collect();
    dict.set_item("x", xs)?;
    dict.set_item("y", ys)?;
    dict.set_item("z", zs)?;
    dict.set_item("labels", labels)?;
    Ok(dict.into_any())
}

/// Generate a scenario with the given seed and run the matching test on it
/// (fig3 uses the invalid single-projection variant). Returns the report.
#[pyfunction]
#[pyo3(signature = (scenario, n=10, t_len=100, pulse_width=5, noise_sd=0.0, seed=0))]
fn run_scenario<'py>(
    py: Python<'py>,
    scenario: &str,
    n: usize,
    t_len: usize,
    pulse_width: usize,
    noise_sd: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let scen = scenario_from_name(scenario)?;
    let cfg = ScenarioConfig {
        scenario: scen,
        n,
        t_len,
        pulse_width,
        noise_sd,
        seed,
    };
    let dataset = gen_scenario(&cfg).map_err(to_py_err)?;
    let report = run_test(&dataset, &scenario_engine_config(scen)).map_err(to_py_err)?;
    serialize_to_py(py, &report)
}

/// Monte Carlo calibration over replicated generator runs; mirrors the CLI's
/// `calibrate` subcommand. Returns the calibration summary as a dict.
#[pyfunction]
#[pyo3(signature = (generator="ar1", reps=200, alpha=0.05, ar_coeff=0.9, coupling=0.7,
                    noise_sd=0.5, seed=0))]
#[allow(clippy::too_many_arguments)]
fn calibrate<'py>(
    py: Python<'py>,
    generator: &str,
    reps: usize,
    alpha: f64,
    ar_coeff: f64,
    coupling: f64,
    noise_sd: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let (datagen, engine_cfg) = match generator {
        "ar1" => (
            DataGen::Null(NullGenConfig {
                x_z_coupling: coupling,
                ..NullGenConfig::new(NullGenerator::Ar1 { ar_coeff }, seed)
            }),
            TestConfig::default(),
        ),
        "randomwalk" => (
            DataGen::Null(NullGenConfig {
                x_z_coupling: coupling,
                ..NullGenConfig::new(NullGenerator::RandomWalk, seed)
            }),
            TestConfig::default(),
        ),
        "fig1" | "fig2" | "fig3" => {
            let scen = scenario_from_name(generator)?;
            (
                DataGen::Scenario(ScenarioConfig {
                    noise_sd,
                    ..ScenarioConfig::new(scen, seed)
                }),
                scenario_engine_config(scen),
            )
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown generator {other:?}"
            )))
        }
    };
    let result = monte_carlo(&datagen, &engine_cfg, reps, alpha).map_err(to_py_err)?;
    serialize_to_py(py, &result)
}

/// Two-sided Student-t tail probability, exposed for cross-checking.
#[pyfunction]
fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    parcorr::stats::student_t_two_sided_p(t, df)
}

/// Sample Pearson correlation of two 1-d series.
#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    parcorr::rho_pearson(&x, &y).map_err(to_py_err)
}

#[pymodule]
fn parcorr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(run_partial_correlation_test, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(generate_null, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(student_t_two_sided_p, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
