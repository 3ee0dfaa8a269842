//! Executes resolved sweep points and writes their results.

use std::fs;
use std::io;
use std::path::Path;

use ddsym_core::aht::average_hamiltonian;
use ddsym_core::error::Error as CoreError;
use ddsym_core::sim::{decay_time, evolve, fidelity_series, precession_angle, prepare_state, Channel, Trajectory};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value as Json};

use crate::config::{ConfigError, ExperimentConfig, Point};

/// Outcome of a scalar measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Measured {
    Ok { value: f64 },
    NotDecayed { last: f64 },
    DegenerateFit { message: String },
    Error { message: String },
}

impl Measured {
    fn from_result(r: Result<f64, CoreError>) -> Self {
        match r {
            Ok(value) => Measured::Ok { value },
            Err(CoreError::NotDecayed { last }) => Measured::NotDecayed { last },
            Err(CoreError::DegenerateFit(message)) => Measured::DegenerateFit { message },
            Err(e) => Measured::Error { message: e.to_string() },
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Measured::Ok { value } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    pub index: usize,
    pub parameters: Map<String, Json>,
    pub label: String,
    pub cycle_time: f64,
    pub n_cycles: usize,
    pub pulses_per_cycle: usize,
    pub epsilon: f64,
    pub decay_time: Measured,
    pub decay_time_total: Measured,
    pub precession_per_pulse: Measured,
    /// `[mx, my, mz]` at the last sample.
    pub final_magnetization: Option<[f64; 3]>,
    /// `(time, fidelity)` after every cycle, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct PointResult {
    pub metrics: Metrics,
    pub trajectory: Option<Trajectory>,
    pub aht_report: String,
}

fn toml_to_json(v: &toml::Value) -> Json {
    serde_json::to_value(v).unwrap_or(Json::Null)
}

pub fn run_point(p: &Point) -> PointResult {
    let eps = p.spec.epsilon;
    let s = &p.sequence;
    let mut warnings = Vec::new();
    let mut error = None;

    let traj = prepare_state(&p.parts, p.config.initial_state)
        .and_then(|rho| evolve(s, &p.parts, eps, &rho, p.n_cycles, &p.config.sample_points));
    let trajectory = match traj {
        Ok(t) => {
            warnings.extend(t.warnings.iter().cloned());
            Some(t)
        }
        Err(e) => {
            error = Some(format!("propagation failed: {e}"));
            None
        }
    };
    let missing = || Measured::Error {
        message: "no trajectory".into(),
    };
    let (decay, decay_total, precession, last) = match &trajectory {
        Some(t) => (
            Measured::from_result(decay_time(t, Channel::My)),
            Measured::from_result(decay_time(t, Channel::Total)),
            Measured::from_result(precession_angle(t, s.pulse_count().max(1))),
            t.len().checked_sub(1).map(|i| [t.mx[i], t.my[i], t.mz[i]]),
        ),
        None => (missing(), missing(), missing(), None),
    };
    let fidelity = if p.config.fidelity {
        match fidelity_series(s, &p.parts, eps, p.n_cycles) {
            Ok(f) => Some(f),
            Err(e) => {
                warnings.push(format!("fidelity failed: {e}"));
                None
            }
        }
    } else {
        None
    };
    let aht_report = match average_hamiltonian(s, &p.parts, eps, p.config.aht_order)
        .and_then(|ah| ah.report(p.parts.n_sites(), 1e-12))
    {
        Ok(r) => r,
        Err(e) => {
            warnings.push(format!("average Hamiltonian failed: {e}"));
            format!("# average Hamiltonian unavailable: {e}\n")
        }
    };
    let parameters = p.parameters.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect();
    PointResult {
        metrics: Metrics {
            index: p.index,
            parameters,
            label: s.label().to_string(),
            cycle_time: s.cycle_time(),
            n_cycles: p.n_cycles,
            pulses_per_cycle: s.pulse_count(),
            epsilon: eps,
            decay_time: decay,
            decay_time_total: decay_total,
            precession_per_pulse: precession,
            final_magnetization: last,
            fidelity,
            error,
            warnings,
        },
        trajectory,
        aht_report,
    }
}

/// Runs every point, in parallel up to `workers`, and returns results in index order.
pub fn run_points(points: &[Point], workers: usize) -> Vec<PointResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| points.par_iter().map(run_point).collect())
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write results: {0}")]
    Io(#[from] io::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    /// Exit status for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub struct RunOutcome {
    pub points: Vec<Point>,
    pub results: Vec<PointResult>,
}

impl RunOutcome {
    pub fn warnings(&self) -> usize {
        self.results
            .iter()
            .map(|r| r.metrics.warnings.len() + r.metrics.error.is_some() as usize)
            .sum()
    }
}

/// Expands, runs and (if `out` or the config names a directory) writes a config.
pub fn run_config(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome, RunError> {
    let points = cfg.expand()?;
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let results = run_points(&points, workers);
    let dir = out.map(Path::to_path_buf).or_else(|| cfg.outputs.clone());
    if let Some(dir) = dir {
        write_results(&dir, cfg, &results)?;
    }
    Ok(RunOutcome { points, results })
}

/// `%.12g`-style formatting.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = trim(format!("{:.*}", decimals, x));
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{:.11e}", x);
        let (mant, e) = s.split_once('e').expect("exponent");
        format!("{}e{}", trim(mant.to_string()), e)
    }
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "mx", "my", "mz"])?;
    for i in 0..t.len() {
        w.write_record([
            fmt_sig(t.times[i]),
            fmt_sig(t.mx[i]),
            fmt_sig(t.my[i]),
            fmt_sig(t.mz[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_results(dir: &Path, cfg: &ExperimentConfig, results: &[PointResult]) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    let mut summary = Vec::new();
    for r in results {
        let m = &r.metrics;
        let pdir = dir.join(format!("point_{:03}", m.index));
        fs::create_dir_all(&pdir)?;
        if let Some(t) = &r.trajectory {
            write_trajectory(&pdir.join("trajectory.csv"), t)?;
        }
        fs::write(
            pdir.join("metrics.json"),
            serde_json::to_string_pretty(m).expect("metrics serialize") + "\n",
        )?;
        fs::write(pdir.join("aht.txt"), &r.aht_report)?;
        summary.push(json!({
            "index": m.index,
            "parameters": m.parameters,
            "label": m.label,
            "status": if m.error.is_some() { "error" } else { "ok" },
            "warnings": m.warnings.len(),
        }));
    }
    let doc = json!({
        "name": cfg.name,
        "n_points": results.len(),
        "points": summary,
    });
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n",
    )?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-0.5), "-0.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(123456.789), "123456.789");
        assert_eq!(fmt_sig(2.0f64.sqrt() * 1e-7), "1.41421356237e-7");
        assert_eq!(fmt_sig(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_sig(0.1 + 0.2), "0.3");
    }

    #[test]
    fn measured_serializes_with_status() {
        let m = Measured::from_result(Err(CoreError::NotDecayed { last: 0.9 }));
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"status":"not-decayed","last":0.9}"#
        );
        let m = Measured::from_result(Ok(2.0));
        assert_eq!(m.value(), Some(2.0));
    }
}
