//! Data ingestion and serialization: numeric CSV series, the dataset
//! manifest, JSON reports, and plot-data emission.
//!
//! CSV files are plain comma-separated numeric matrices (rows = timepoints,
//! columns = dimensions) with an optional single header row, detected by the
//! first row failing to parse as numbers. Values are written with Rust's
//! shortest round-trip formatting, so a written series reloads bit-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{ProjectionMode, TestConfig, TestReport};
use crate::error::{Error, Result};
use crate::model::{validate_dataset, Dataset, Experiment, SeriesMatrix};
use crate::projection::{hstack, orthonormal_basis, residualize};
use crate::simulate::{CalibrationResult, DataGen};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads a numeric CSV file as a series matrix.
pub fn load_csv_series(path: &Path) -> Result<SeriesMatrix> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv_series(&text, &path.display().to_string())
}

/// CSV parsing on an in-memory string; row numbers in errors are 1-based and
/// count raw lines, including any header.
pub fn parse_csv_series(text: &str, path: &str) -> Result<SeriesMatrix> {
    let parse_err = |row: usize, col: Option<usize>, msg: String| Error::Parse {
        path: path.to_string(),
        row,
        col,
        msg,
    };

    let rows_raw: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(idx, line)| (idx + 1, line))
        .filter(|(_, line)| !line.trim().is_empty())
        .collect();
    if rows_raw.is_empty() {
        return Err(parse_err(1, None, "empty file".to_string()));
    }

    enum CellError {
        NonNumeric(usize, String),
        NonFinite(usize, String),
    }
    impl CellError {
        fn into_parts(self) -> (usize, String) {
            match self {
                CellError::NonNumeric(col, msg) | CellError::NonFinite(col, msg) => (col, msg),
            }
        }
    }

    let parse_row = |line: &str| -> std::result::Result<Vec<f64>, CellError> {
        line.split(',')
            .enumerate()
            .map(|(col, cell)| {
                let cell = cell.trim();
                let value: f64 = cell.parse().map_err(|_| {
                    CellError::NonNumeric(col + 1, format!("cannot parse {cell:?} as a number"))
                })?;
                if !value.is_finite() {
                    return Err(CellError::NonFinite(
                        col + 1,
                        format!("non-finite value {cell:?}"),
                    ));
                }
                Ok(value)
            })
            .collect()
    };

    // Header detection: the first row is a header iff it fails numeric parse
    // outright. A numeric but non-finite first row is data, and an error.
    let mut data_rows: Vec<Vec<f64>> = Vec::with_capacity(rows_raw.len());
    let start;
    match parse_row(rows_raw[0].1) {
        Ok(row) => {
            data_rows.push(row);
            start = 1;
        }
        Err(CellError::NonFinite(col, msg)) => {
            return Err(parse_err(rows_raw[0].0, Some(col), msg));
        }
        Err(CellError::NonNumeric(..)) => {
            if rows_raw.len() == 1 {
                return Err(parse_err(
                    rows_raw[0].0,
                    None,
                    "file contains only a header row".to_string(),
                ));
            }
            match parse_row(rows_raw[1].1) {
                Ok(row) => {
                    data_rows.push(row);
                    start = 2;
                }
                Err(e) => {
                    let (col, msg) = e.into_parts();
                    return Err(parse_err(rows_raw[1].0, Some(col), msg));
                }
            }
        }
    }

    let width = data_rows[0].len();
    for &(line_no, line) in &rows_raw[start..] {
        let row = parse_row(line).map_err(|e| {
            let (col, msg) = e.into_parts();
            parse_err(line_no, Some(col), msg)
        })?;
        if row.len() != width {
            return Err(parse_err(
                line_no,
                None,
                format!("ragged row: expected {width} columns, found {}", row.len()),
            ));
        }
        data_rows.push(row);
    }

    SeriesMatrix::from_rows(&data_rows)
        .ok_or_else(|| parse_err(1, None, "inconsistent row widths".to_string()))
}

/// Writes a series matrix as headerless CSV with full-precision numbers.
pub fn write_csv_series(m: &SeriesMatrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.t_len() {
        let row: Vec<String> = (0..m.n_cols())
            .map(|j| format!("{}", m.values()[(i, j)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub x_path: String,
    pub y_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub experiments: Vec<ManifestEntry>,
}

fn manifest_err(path: &Path, msg: String) -> Error {
    Error::Json {
        path: path.display().to_string(),
        msg,
    }
}

/// Loads a manifest and every series it references, assembling a validated
/// dataset. Series paths are resolved relative to the manifest's directory;
/// a missing `z_path` yields a zero-column confounder.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| manifest_err(path, e.to_string()))?;

    if manifest.version != 1 {
        return Err(manifest_err(
            path,
            format!("unsupported manifest version {} (expected 1)", manifest.version),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for entry in &manifest.experiments {
        if !seen.insert(entry.label.as_str()) {
            return Err(manifest_err(
                path,
                format!("duplicate experiment label {:?}", entry.label),
            ));
        }
    }

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &str| -> PathBuf {
        let candidate = Path::new(p);
        if candidate.is_absolute() {
            candidate.to_path_buf()
        } else {
            base.join(candidate)
        }
    };

    let mut experiments = Vec::with_capacity(manifest.experiments.len());
    for entry in &manifest.experiments {
        let x = load_csv_series(&resolve(&entry.x_path))?;
        let y = load_csv_series(&resolve(&entry.y_path))?;
        let z = match &entry.z_path {
            Some(p) => load_csv_series(&resolve(p))?,
            None => SeriesMatrix::empty(x.t_len()),
        };
        experiments.push(Experiment::new(x, y, z, entry.label.clone()));
    }

    let dataset = Dataset::new(experiments);
    let validation = validate_dataset(&dataset);
    if !validation.is_ok() {
        return Err(Error::Validation(validation.violations));
    }
    Ok(dataset)
}

fn safe_name(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Writes each experiment's series as CSV plus a manifest that reloads into
/// the same dataset. Zero-column confounders are represented by omitting the
/// z path.
pub fn dump_dataset(d: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut entries = Vec::with_capacity(d.n());
    for e in &d.experiments {
        let stem = safe_name(&e.label);
        let x_path = format!("{stem}_x.csv");
        let y_path = format!("{stem}_y.csv");
        write_csv_series(&e.x, &dir.join(&x_path))?;
        write_csv_series(&e.y, &dir.join(&y_path))?;
        let z_path = if e.z.n_cols() > 0 {
            let p = format!("{stem}_z.csv");
            write_csv_series(&e.z, &dir.join(&p))?;
            Some(p)
        } else {
            None
        };
        entries.push(ManifestEntry {
            label: e.label.clone(),
            x_path,
            y_path,
            z_path,
        });
    }
    let manifest = Manifest {
        version: 1,
        experiments: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| manifest_err(&path, e.to_string()))?;
    fs::write(&path, text).map_err(|e| io_err(&path, e))
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    g: &'a [f64],
    t_stat: f64,
    df: usize,
    p_value: f64,
    skewness: f64,
    qq_points: &'a [(f64, f64)],
    mode: ProjectionMode,
    rho: &'a crate::association::RhoMeasure,
    n: usize,
    t_len: usize,
    warnings: &'a [String],
    tool_version: &'a str,
}

/// Renders a report as JSON. Every key is always present; numbers keep full
/// double precision.
pub fn report_to_json(report: &TestReport) -> String {
    let doc = ReportDoc {
        g: &report.g,
        t_stat: report.t_stat,
        df: report.df,
        p_value: report.p_value,
        skewness: report.skewness,
        qq_points: &report.qq_points,
        mode: report.mode,
        rho: &report.rho,
        n: report.n,
        t_len: report.t_len,
        warnings: &report.warnings,
        tool_version: TOOL_VERSION,
    };
    serde_json::to_string_pretty(&doc).expect("report serialization cannot fail")
}

pub fn write_report(report: &TestReport, path: &Path) -> Result<()> {
    fs::write(path, report_to_json(report)).map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct CalibrationDoc<'a> {
    generator: &'a DataGen,
    mode: ProjectionMode,
    #[serde(flatten)]
    result: &'a CalibrationResult,
    tool_version: &'a str,
}

pub fn write_calibration(
    result: &CalibrationResult,
    generator: &DataGen,
    mode: ProjectionMode,
    path: &Path,
) -> Result<()> {
    let doc = CalibrationDoc {
        generator,
        mode,
        result,
        tool_version: TOOL_VERSION,
    };
    let text =
        serde_json::to_string_pretty(&doc).expect("calibration serialization cannot fail");
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Emits the series a plotting tool needs to reproduce the figures: every
/// experiment's x, y, z as CSV, the first pair's residualized y (joint or
/// single projection per the report's mode), the G values, and the QQ points.
pub fn emit_plot_data(
    d: &Dataset,
    report: &TestReport,
    cfg: &TestConfig,
    out_dir: &Path,
) -> Result<()> {
    let validation = validate_dataset(d);
    if !validation.is_ok() {
        return Err(Error::Validation(validation.violations));
    }
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    for e in &d.experiments {
        let stem = safe_name(&e.label);
        write_csv_series(&e.x, &out_dir.join(format!("{stem}_x.csv")))?;
        write_csv_series(&e.y, &out_dir.join(format!("{stem}_y.csv")))?;
        if e.z.n_cols() > 0 {
            write_csv_series(&e.z, &out_dir.join(format!("{stem}_z.csv")))?;
        }
    }

    // Residual of the first experiment's y for the pair (1, 2), matching the
    // projection mode that produced the report.
    let t = d.t_len();
    let with_intercept = |z: &nalgebra::DMatrix<f64>| {
        if cfg.project_intercept {
            hstack(&nalgebra::DMatrix::from_element(t, 1, 1.0), z)
        } else {
            z.clone()
        }
    };
    let z1 = with_intercept(d.experiments[0].z.values());
    let basis = match report.mode {
        ProjectionMode::ValidJoint => {
            let z2 = with_intercept(d.experiments[1].z.values());
            orthonormal_basis(&hstack(&z1, &z2), cfg.basis_tol)
        }
        ProjectionMode::InvalidSingle => orthonormal_basis(&z1, cfg.basis_tol),
    };
    let resid = residualize(d.experiments[0].y.values(), &basis)?;
    write_csv_series(
        &SeriesMatrix::new(resid),
        &out_dir.join("residual_y1_pair12.csv"),
    )?;

    let mut g_text = String::from("index,g\n");
    for (i, g) in report.g.iter().enumerate() {
        g_text.push_str(&format!("{},{}\n", i + 1, g));
    }
    let g_path = out_dir.join("g_values.csv");
    fs::write(&g_path, g_text).map_err(|e| io_err(&g_path, e))?;

    let mut qq_text = String::from("theoretical,empirical\n");
    for (theo, emp) in &report.qq_points {
        qq_text.push_str(&format!("{theo},{emp}\n"));
    }
    let qq_path = out_dir.join("qq.csv");
    fs::write(&qq_path, qq_text).map_err(|e| io_err(&qq_path, e))
}
