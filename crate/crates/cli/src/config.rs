//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "xy4-demo"
//! n_cycles = 10                 # or total_time = 1000.0 (us)
//! aht_order = 1
//! fidelity = false
//! workers = 2
//! outputs = "out/xy4"
//!
//! [hamiltonian]
//! n_bath = 4
//! bath_model = "secular_dipolar"  # none | secular_dipolar | diagonal
//! scale_b = 0.05                  # sampled couplings ...
//! scale_d = 0.02
//! seed = 1
//! epsilon = 0.05
//! # b = [...]  d = [...]          # ... or explicit ones
//!
//! [sequence]
//! builder = "xy4"                 # cpmg | xy4 | xy8 | xy16 | cdd
//! tau = 10.0
//! symmetric = true
//! # dsl = "2x[d10 X d10 Y]"       # instead of builder
//!
//! [sample_points]
//! mode = "cycle_boundaries"       # window_centers | every_pulse | uniform (+ dt)
//!
//! [[sweep]]
//! path = "sequence.tau"
//! values = [5.0, 10.0, 20.0]
//! ```
//!
//! Sweeps form the cartesian product of all axes; the first axis varies slowest.

use std::path::{Path, PathBuf};

use ddsym_core::model::{build_hamiltonian, sample_couplings, BathModel, HamiltonianParts, HamiltonianSpec};
use ddsym_core::opcore::SpinAxis;
use ddsym_core::seq::{parse_sequence, PulseSequence, SequenceBuilder};
use ddsym_core::sim::SamplePoints;
use serde::{Deserialize, Serialize};
use toml::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid TOML: {0}")]
    Toml(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub n_bath: usize,
    #[serde(default)]
    pub omega_s: f64,
    #[serde(default)]
    pub bath_model: BathModel,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
}

impl HamiltonianConfig {
    pub fn to_spec(&self) -> Result<HamiltonianSpec, ConfigError> {
        let (b, d) = match (&self.b, self.scale_b) {
            (Some(_), Some(_)) => return Err(invalid("hamiltonian: give either b or scale_b, not both")),
            (Some(b), None) => {
                if self.scale_d.is_some() {
                    return Err(invalid("hamiltonian: scale_d needs scale_b; use d with explicit b"));
                }
                (b.clone(), self.d.clone().unwrap_or_default())
            }
            (None, Some(sb)) => {
                if self.d.is_some() {
                    return Err(invalid("hamiltonian: explicit d needs explicit b"));
                }
                let sd = match (self.bath_model, self.scale_d) {
                    (_, Some(sd)) => sd,
                    (BathModel::None, None) => 1.0,
                    (_, None) => return Err(invalid("hamiltonian: scale_d is required for an interacting bath")),
                };
                let (b, d) = sample_couplings(self.n_bath, sb, sd, self.seed).map_err(|e| invalid(e.to_string()))?;
                (
                    b,
                    if self.bath_model == BathModel::None {
                        Vec::new()
                    } else {
                        d
                    },
                )
            }
            (None, None) if self.n_bath == 0 => (Vec::new(), Vec::new()),
            (None, None) => return Err(invalid("hamiltonian: need b or scale_b")),
        };
        let spec = HamiltonianSpec {
            n_bath: self.n_bath,
            omega_s: self.omega_s,
            b,
            bath_model: self.bath_model,
            d,
            epsilon: self.epsilon,
            seed: self.seed,
        };
        spec.validate().map_err(|e| invalid(format!("hamiltonian: {e}")))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DslSequence {
    pub dsl: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceConfig {
    Dsl(DslSequence),
    Named(SequenceBuilder),
}

impl SequenceConfig {
    pub fn build(&self) -> Result<PulseSequence, ConfigError> {
        match self {
            SequenceConfig::Dsl(d) => parse_sequence(&d.dsl),
            SequenceConfig::Named(b) => b.build(),
        }
        .map_err(|e| invalid(format!("sequence: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<Value>,
}

fn default_samples() -> SamplePoints {
    SamplePoints::CycleBoundaries
}

fn default_order() -> usize {
    1
}

fn default_axis() -> SpinAxis {
    SpinAxis::Y
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub hamiltonian: HamiltonianConfig,
    pub sequence: SequenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cycles: Option<usize>,
    /// Alternative to `n_cycles`: the run covers `round(total_time / cycle_time)` cycles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_time: Option<f64>,
    #[serde(default = "default_samples")]
    pub sample_points: SamplePoints,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_order")]
    pub aht_order: usize,
    /// Also record the process fidelity after every cycle.
    #[serde(default)]
    pub fidelity: bool,
    #[serde(default = "default_axis")]
    pub initial_state: SpinAxis,
}

/// One fully resolved sweep point.
#[derive(Clone, Debug)]
pub struct Point {
    pub index: usize,
    pub parameters: Vec<(String, Value)>,
    pub config: ExperimentConfig,
    pub spec: HamiltonianSpec,
    pub parts: HamiltonianParts,
    pub sequence: PulseSequence,
    pub n_cycles: usize,
}

impl Point {
    pub fn param(&self, path: &str) -> Option<&Value> {
        self.parameters.iter().find(|(p, _)| p == path).map(|(_, v)| v)
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let value: Value = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Toml(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    fn from_value(value: Value) -> Result<Self, ConfigError> {
        check_sequence_table(&value)?;
        let cfg: ExperimentConfig = value.try_into().map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        cfg.check_top_level()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check_top_level(&self) -> Result<(), ConfigError> {
        match (self.n_cycles, self.total_time) {
            (Some(0), _) => return Err(invalid("n_cycles must be >= 1")),
            (Some(_), None) => {}
            (None, Some(t)) if t > 0.0 && t.is_finite() => {}
            (None, Some(t)) => return Err(invalid(format!("total_time must be positive, got {t}"))),
            (Some(_), Some(_)) => return Err(invalid("give n_cycles or total_time, not both")),
            (None, None) => return Err(invalid("one of n_cycles or total_time is required")),
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be >= 1"));
        }
        if self.aht_order > 2 {
            return Err(invalid(format!(
                "aht_order {} is above the supported maximum of 2",
                self.aht_order
            )));
        }
        for axis in &self.sweep {
            if axis.values.is_empty() {
                return Err(invalid(format!("sweep over {} has no values", axis.path)));
            }
            if axis.path.starts_with("sweep") {
                return Err(invalid("a sweep cannot modify the sweep itself"));
            }
            for v in &axis.values {
                if let Value::Float(f) = v {
                    if !f.is_finite() {
                        return Err(invalid(format!("sweep over {} has non-finite value {f}", axis.path)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Resolves every sweep point, validating each.
    pub fn expand(&self) -> Result<Vec<Point>, ConfigError> {
        let base = Value::try_from(self).map_err(|e| invalid(e.to_string()))?;
        let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for axis in &self.sweep {
            let mut next = Vec::with_capacity(combos.len() * axis.values.len());
            for c in &combos {
                for v in &axis.values {
                    let mut c = c.clone();
                    c.push((axis.path.clone(), v.clone()));
                    next.push(c);
                }
            }
            combos = next;
        }
        combos
            .into_iter()
            .enumerate()
            .map(|(index, parameters)| {
                let mut v = base.clone();
                if let Value::Table(t) = &mut v {
                    t.remove("sweep");
                }
                for (path, val) in &parameters {
                    set_path(&mut v, path, val.clone())?;
                }
                let config =
                    ExperimentConfig::from_value(v).map_err(|e| invalid(format!("sweep point {index}: {e}")))?;
                resolve(index, parameters, config)
            })
            .collect()
    }
}

fn resolve(index: usize, parameters: Vec<(String, Value)>, config: ExperimentConfig) -> Result<Point, ConfigError> {
    let spec = config.hamiltonian.to_spec()?;
    let parts = build_hamiltonian(&spec).map_err(|e| invalid(format!("hamiltonian: {e}")))?;
    let sequence = config.sequence.build()?;
    let tc = sequence.cycle_time();
    let n_cycles = match (config.n_cycles, config.total_time) {
        (Some(n), _) => n,
        (None, Some(t)) => {
            if tc <= 0.0 {
                return Err(invalid("total_time needs a sequence with positive cycle time"));
            }
            ((t / tc).round() as usize).max(1)
        }
        _ => unreachable!("checked in check_top_level"),
    };
    Ok(Point {
        index,
        parameters,
        config,
        spec,
        parts,
        sequence,
        n_cycles,
    })
}

fn check_sequence_table(v: &Value) -> Result<(), ConfigError> {
    let seq = v
        .get("sequence")
        .and_then(Value::as_table)
        .ok_or_else(|| invalid("missing [sequence] table"))?;
    match (seq.contains_key("builder"), seq.contains_key("dsl")) {
        (true, true) => Err(invalid("sequence: give either builder or dsl, not both")),
        (false, false) => Err(invalid("sequence: need builder or dsl")),
        _ => Ok(()),
    }
}

fn set_path(root: &mut Value, path: &str, val: Value) -> Result<(), ConfigError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(invalid(format!("bad sweep path '{path}'")));
    }
    let mut cur = root;
    for k in &keys[..keys.len() - 1] {
        cur = cur
            .get_mut(*k)
            .filter(|c| c.is_table())
            .ok_or_else(|| invalid(format!("sweep path '{path}': no table '{k}'")))?;
    }
    let table = cur
        .as_table_mut()
        .ok_or_else(|| invalid(format!("sweep path '{path}' is not inside a table")))?;
    table.insert(keys[keys.len() - 1].to_string(), val);
    Ok(())
}
