//! CSV artifacts of a run and the offline re-check of their properties.
//!
//! A run directory holds one log per run (`log.csv`, or `log_NNN.csv` for
//! sweeps), `summary.csv` with one row per run, and the modal constants.
//! Summary rows carry the full scenario as `section.key` columns, so
//! [`verify`] can rebuild each configuration from the outputs alone.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::contact::{contact_force, Environment};
use crate::error::{FlexError, Result};
use crate::kinematics::PlanarPoint;
use crate::modal::{ModalBasis, ModalConstants, ModeShape, QuadratureConfig, GOLDEN_QUAD_PANELS};
use crate::scenario::ScenarioFile;
use crate::sim::{run_scenario, SimLog, SimOutcome, Summary, STEADY_WINDOW};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONSTANTS_FILE: &str = "constants.csv";

/// Relative tolerance of the steady force and penetration checks.
pub const STEADY_TOLERANCE: f64 = 0.02;
/// Absolute force tolerance when `fd = 0` (N).
pub const ZERO_FORCE_TOLERANCE: f64 = 1e-3;
/// Bound on the tip deflection over the steady window (m).
pub const DEFLECTION_LIMIT: f64 = 1e-4;
/// Per-sample Lyapunov increase allowed, relative to `V(0)`.
pub const LYAPUNOV_TOLERANCE: f64 = 1e-6;

pub fn log_header(mode_count: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "theta".into(), "theta_dot".into()];
    for j in 1..=mode_count {
        h.push(format!("q1{j}"));
        h.push(format!("q1{j}_dot"));
    }
    h.extend(["px", "py", "fcx", "fcy", "fnorm", "u_theta"].map(String::from));
    for j in 1..=mode_count {
        h.push(format!("u_q1{j}"));
    }
    h.extend(["V", "Vdot", "w_tip", "K", "Vpot"].map(String::from));
    h
}

pub fn write_log(path: &Path, log: &SimLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(log_header(log.mode_count))?;
    let mut row = Vec::new();
    for s in &log.samples {
        row.clear();
        row.push(s.t);
        row.extend_from_slice(&s.state);
        row.extend([s.tip.x, s.tip.y, s.force.x, s.force.y, s.force_norm]);
        row.extend_from_slice(&s.input);
        row.extend([s.lyapunov, s.lyapunov_rate, s.tip_deflection, s.kinetic, s.potential]);
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns of a parsed log, keyed by header name.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTable {
    pub columns: BTreeMap<String, Vec<f64>>,
}

impl LogTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.columns.get("t").map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn read_log(path: &Path) -> Result<LogTable> {
    if !path.exists() {
        return Err(FlexError::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let mut data = vec![Vec::new(); headers.len()];
    for (line, record) in r.records().enumerate() {
        let record = record?;
        for (i, field) in record.iter().enumerate() {
            let v = field.parse::<f64>().map_err(|_| FlexError::Malformed {
                path: path.to_path_buf(),
                message: format!("row {}: `{field}` in column {} is not a number", line + 2, headers[i]),
            })?;
            data[i].push(v);
        }
    }
    Ok(LogTable {
        columns: headers.into_iter().zip(data).collect(),
    })
}

pub fn write_constants(path: &Path, shapes: &[ModeShape], constants: &ModalConstants) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mode_index", "beta_l", "a0", "a1", "a2", "a3"])?;
    for (shape, m) in shapes.iter().zip(&constants.modes) {
        w.write_record([
            shape.index.to_string(),
            shape.root.to_string(),
            m.a0.to_string(),
            m.a1.to_string(),
            m.a2.to_string(),
            m.a3.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_basis_constants(path: &Path, basis: &ModalBasis) -> Result<()> {
    write_constants(path, &basis.shapes, &basis.constants)
}

/// One row of `summary.csv`.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub run: usize,
    pub log_file: Option<String>,
    pub outcome: std::result::Result<Summary, String>,
    pub scenario: ScenarioFile,
}

const METRICS: [&str; 16] = [
    "contact_time",
    "free_phase_tracking_error",
    "lyapunov_initial",
    "lyapunov_max_increase",
    "steady_force",
    "steady_force_error",
    "steady_penetration",
    "expected_penetration",
    "steady_tip_x",
    "steady_tip_y",
    "tip_position_error",
    "max_tip_deflection",
    "settling_time",
    "force_error_sup",
    "velocity_error_bound",
    "force_bound_holds",
];

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let meta_keys: Vec<String> = rows
        .iter()
        .flat_map(|r| r.scenario.metadata().into_keys())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["run".to_string(), "log_file".into(), "status".into()];
    header.extend(METRICS.map(String::from));
    header.extend(meta_keys.iter().cloned());
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for row in rows {
        let mut record = vec![row.run.to_string(), row.log_file.clone().unwrap_or_default()];
        match &row.outcome {
            Ok(s) => {
                record.push("ok".into());
                record.extend([
                    opt(s.contact_time),
                    s.free_phase_tracking_error.to_string(),
                    s.lyapunov_initial.to_string(),
                    s.lyapunov_max_increase.to_string(),
                    s.steady_force.to_string(),
                    s.steady_force_error.to_string(),
                    s.steady_penetration.to_string(),
                    s.expected_penetration.to_string(),
                    s.steady_tip.x.to_string(),
                    s.steady_tip.y.to_string(),
                    s.tip_position_error.to_string(),
                    s.max_tip_deflection.to_string(),
                    opt(s.settling_time),
                    s.force_error_sup.to_string(),
                    s.velocity_error_bound.to_string(),
                    s.force_bound_holds.to_string(),
                ]);
            }
            Err(message) => {
                record.push(format!("error: {message}"));
                record.extend(METRICS.iter().map(|_| String::new()));
            }
        }
        let meta = row.scenario.metadata();
        record.extend(meta_keys.iter().map(|k| meta.get(k).cloned().unwrap_or_default()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `scenario` (every sweep row when `sweep` is set, in parallel) and
/// writes logs, constants and `summary.csv` under `dir`.
///
/// A single run fails with its error; sweep rows that fail are recorded in the
/// summary with their message and do not stop the others.
pub fn run_to_dir(scenario: &ScenarioFile, dir: &Path, sweep: bool) -> Result<Vec<SummaryRow>> {
    prepare_dir(dir)?;
    let scenarios = if sweep {
        scenario.expand_sweep()?
    } else {
        let mut single = scenario.clone();
        single.sweep = None;
        vec![single]
    };
    let outcomes: Vec<Result<(SimOutcome, ModalBasis)>> = scenarios
        .par_iter()
        .map(|s| {
            let config = s.to_config()?;
            let basis = ModalBasis::new(config.beam, &config.quadrature)?;
            Ok((run_scenario(config)?, basis))
        })
        .collect();
    let mut rows = Vec::with_capacity(scenarios.len());
    for (run, (scenario, outcome)) in scenarios.into_iter().zip(outcomes).enumerate() {
        let (log_name, constants_name) = if sweep {
            (format!("log_{run:03}.csv"), format!("constants_{run:03}.csv"))
        } else {
            ("log.csv".to_string(), CONSTANTS_FILE.to_string())
        };
        let row = match outcome {
            Ok((outcome, basis)) => {
                log::info!(
                    "run {run}: steady force {:.4} N, penetration {:.5} m",
                    outcome.summary.steady_force,
                    outcome.summary.steady_penetration
                );
                write_log(&dir.join(&log_name), &outcome.log)?;
                write_basis_constants(&dir.join(constants_name), &basis)?;
                SummaryRow {
                    run,
                    log_file: Some(log_name),
                    outcome: Ok(outcome.summary),
                    scenario,
                }
            }
            Err(e) if sweep => {
                log::error!("sweep row {run} failed: {e}");
                SummaryRow {
                    run,
                    log_file: None,
                    outcome: Err(e.to_string()),
                    scenario,
                }
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    write_summary(&dir.join(SUMMARY_FILE), &rows)?;
    Ok(rows)
}

/// Writes `constants.csv` for `scenario` at golden quadrature resolution.
pub fn seed_constants(scenario: &ScenarioFile, dir: &Path) -> Result<ModalBasis> {
    prepare_dir(dir)?;
    let config = scenario.to_config()?;
    let basis = ModalBasis::new(config.beam, &QuadratureConfig::with_panels(GOLDEN_QUAD_PANELS))?;
    write_basis_constants(&dir.join(CONSTANTS_FILE), &basis)?;
    Ok(basis)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub run: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} run {} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.run,
                    c.name,
                    c.detail
                )
            })
            .collect()
    }
}

/// Re-checks a run directory: Lyapunov monotonicity before contact, steady
/// force, penetration law and residual vibration, for every successful row.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    let summary_path = dir.join(SUMMARY_FILE);
    if !summary_path.exists() {
        return Err(FlexError::MissingFile(summary_path));
    }
    let mut reader = csv::Reader::from_path(&summary_path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let mut report = VerifyReport::default();
    for record in reader.records() {
        let record = record?;
        let field = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .and_then(|i| record.get(i))
                .unwrap_or("")
        };
        let run: usize = field("run").parse().map_err(|_| FlexError::Malformed {
            path: summary_path.clone(),
            message: "run column is not an integer".into(),
        })?;
        if field("status") != "ok" {
            continue;
        }
        let meta = headers
            .iter()
            .zip(record.iter())
            .filter(|(h, v)| h.contains('.') && !v.is_empty())
            .map(|(h, v)| (h.as_str(), v));
        let scenario = ScenarioFile::from_metadata(meta, &summary_path)?;
        let config = scenario.to_config()?;
        let log_path: PathBuf = dir.join(field("log_file"));
        let log = read_log(&log_path)?;
        report
            .checks
            .extend(check_log(run, &log, &config.environment, config.desired_force, config.duration, &log_path)?);
    }
    if report.checks.is_empty() {
        return Err(FlexError::Malformed {
            path: summary_path,
            message: "no successful runs to verify".into(),
        });
    }
    Ok(report)
}

fn check_log(
    run: usize,
    log: &LogTable,
    env: &Environment,
    fd: f64,
    duration: f64,
    path: &Path,
) -> Result<Vec<Check>> {
    let col = |name: &str| {
        log.column(name).ok_or_else(|| FlexError::Malformed {
            path: path.to_path_buf(),
            message: format!("missing column {name}"),
        })
    };
    let (t, px, py, fnorm, v, w) = (col("t")?, col("px")?, col("py")?, col("fnorm")?, col("V")?, col("w_tip")?);
    if t.is_empty() {
        return Err(FlexError::Malformed {
            path: path.to_path_buf(),
            message: "log has no samples".into(),
        });
    }
    let penetration: Vec<f64> = px
        .iter()
        .zip(py)
        .map(|(&x, &y)| contact_force(PlanarPoint::new(x, y), env).penetration)
        .collect();
    let free_end = penetration.iter().position(|&d| d > 0.0).unwrap_or(t.len());
    let start = duration * (1.0 - STEADY_WINDOW) - 1e-9;
    let steady = t.partition_point(|&s| s < start);
    let mean = |xs: &[f64]| xs[steady..].iter().sum::<f64>() / (xs.len() - steady).max(1) as f64;

    let v0 = v[0];
    let mut worst = f64::NEG_INFINITY;
    let mut negative = false;
    for k in 0..free_end {
        negative |= v[k] < 0.0;
        if k + 1 < free_end {
            worst = worst.max(v[k + 1] - v[k]);
        }
    }
    let lyapunov_ok = !negative && worst <= LYAPUNOV_TOLERANCE * v0.abs();

    let force = mean(fnorm);
    let (force_ok, force_detail) = if fd > 0.0 {
        let rel = (force - fd).abs() / fd;
        (rel <= STEADY_TOLERANCE, format!("steady |fc| = {force:.6} N vs fd = {fd} N ({:.3}%)", rel * 100.0))
    } else {
        (force.abs() <= ZERO_FORCE_TOLERANCE, format!("steady |fc| = {force:.3e} N vs fd = 0"))
    };

    let depth = mean(&penetration);
    let expected = fd / env.normal_stiffness();
    let (depth_ok, depth_detail) = if expected > 0.0 {
        let rel = (depth - expected).abs() / expected;
        (rel <= STEADY_TOLERANCE, format!("steady δ = {depth:.6} m vs fd/Ke = {expected:.6} m ({:.3}%)", rel * 100.0))
    } else {
        (depth <= DEFLECTION_LIMIT, format!("steady δ = {depth:.3e} m vs 0"))
    };

    let max_w = w[steady..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(vec![
        Check {
            run,
            name: "lyapunov_monotone",
            passed: lyapunov_ok,
            detail: format!("{free_end} free-phase samples, largest step change {worst:.3e}, V(0) = {v0:.3e}"),
        },
        Check {
            run,
            name: "steady_force",
            passed: force_ok,
            detail: force_detail,
        },
        Check {
            run,
            name: "penetration_law",
            passed: depth_ok,
            detail: depth_detail,
        },
        Check {
            run,
            name: "residual_vibration",
            passed: max_w < DEFLECTION_LIMIT,
            detail: format!("max |w(l)| over the final window = {max_w:.3e} m"),
        },
    ])
}

/// Creates `dir` if needed and checks it is writable.
pub fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let probe = dir.join(".flexlink-write-test");
    File::create(&probe)?;
    std::fs::remove_file(probe)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_for_two_modes() {
        assert_eq!(
            log_header(2).join(","),
            "t,theta,theta_dot,q11,q11_dot,q12,q12_dot,px,py,fcx,fcy,fnorm,u_theta,u_q11,u_q12,V,Vdot,w_tip,K,Vpot"
        );
        assert_eq!(log_header(3).len(), 23);
    }

    #[test]
    fn empty_dir_reports_missing_summary() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(verify(dir.path()), Err(FlexError::MissingFile(_))));
    }
}
