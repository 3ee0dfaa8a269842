//! Bundled presets for the figure reproductions and the summaries derived from them.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value as Json};

use crate::config::{ConfigError, ExperimentConfig, Point};
use crate::run::{PointResult, RunOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig7,
    Fig8,
    Fig9,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig7,
        Figure::Fig8,
        Figure::Fig9,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
        }
    }

    pub fn preset_text(self) -> &'static str {
        match self {
            Figure::Fig2 => include_str!("../presets/fig2.toml"),
            Figure::Fig3 => include_str!("../presets/fig3.toml"),
            Figure::Fig4 => include_str!("../presets/fig4.toml"),
            Figure::Fig5 => include_str!("../presets/fig5.toml"),
            Figure::Fig7 => include_str!("../presets/fig7.toml"),
            Figure::Fig8 => include_str!("../presets/fig8.toml"),
            Figure::Fig9 => include_str!("../presets/fig9.toml"),
        }
    }

    pub fn preset(self) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_toml_str(self.preset_text())
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL.into_iter().find(|f| f.id() == s).ok_or_else(|| {
            let ids: Vec<_> = Figure::ALL.iter().map(|f| f.id()).collect();
            format!("unknown figure '{s}' (expected one of {})", ids.join(", "))
        })
    }
}

fn tau(p: &Point) -> f64 {
    if let Some(t) = p.param("sequence.tau").and_then(|v| v.as_float()) {
        return t;
    }
    p.sequence.cycle_time() / p.sequence.pulse_count().max(1) as f64
}

fn symmetric(p: &Point) -> Option<bool> {
    p.param("sequence.symmetric").and_then(|v| v.as_bool())
}

fn family(p: &Point) -> String {
    p.param("sequence.builder")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .unwrap_or_else(|| {
            let l = p.sequence.label();
            l.strip_suffix("(S)")
                .or_else(|| l.strip_suffix("(A)"))
                .unwrap_or(l)
                .to_string()
        })
}

/// Sample times where My has returned to 1 within `tol`.
pub fn echo_times(r: &PointResult, tol: f64) -> Vec<f64> {
    match &r.trajectory {
        Some(t) => (0..t.len())
            .filter(|&i| (t.my[i] - 1.0).abs() <= tol)
            .map(|i| t.times[i])
            .collect(),
        None => Vec::new(),
    }
}

/// Smallest gap between consecutive echoes.
pub fn echo_spacing(times: &[f64]) -> Option<f64> {
    times.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp)
}

fn metric_rows(outcome: &RunOutcome, f: impl Fn(&PointResult) -> Json) -> Vec<Json> {
    outcome
        .points
        .iter()
        .zip(&outcome.results)
        .map(|(p, r)| {
            json!({
                "label": p.sequence.label(),
                "family": family(p),
                "symmetric": symmetric(p),
                "tau": tau(p),
                "value": f(r),
            })
        })
        .collect()
}

/// Figure-specific digest of a finished preset run.
pub fn summarize(fig: Figure, outcome: &RunOutcome) -> Json {
    match fig {
        Figure::Fig2 => {
            let mut out = serde_json::Map::new();
            let mut spacing = [None, None];
            for (p, r) in outcome.points.iter().zip(&outcome.results) {
                let times = echo_times(r, 1e-9);
                let gap = echo_spacing(&times);
                let key = if symmetric(p) == Some(true) {
                    "symmetric"
                } else {
                    "asymmetric"
                };
                spacing[(key == "asymmetric") as usize] = gap;
                out.insert(key.into(), json!({ "echo_times": times, "spacing": gap }));
            }
            if let [Some(s), Some(a)] = spacing {
                out.insert("spacing_ratio".into(), json!(s / a));
            }
            Json::Object(out)
        }
        Figure::Fig3 => {
            let rows = metric_rows(outcome, |r| json!(r.metrics.final_magnetization.map(|m| m[1])));
            json!({ "quantity": "My after one cycle", "rows": rows, "symmetric_ge_asymmetric": fig3_ordering(outcome) })
        }
        Figure::Fig4 | Figure::Fig5 => {
            json!({ "quantity": "My decay time", "rows": metric_rows(outcome, |r| json!(r.metrics.decay_time)) })
        }
        Figure::Fig7 => json!({
            "quantity": "precession per pulse (rad)",
            "rows": metric_rows(outcome, |r| json!(r.metrics.precession_per_pulse)),
        }),
        Figure::Fig8 => json!({
            "quantity": "total magnetization decay time",
            "rows": metric_rows(outcome, |r| json!(r.metrics.decay_time_total)),
        }),
        Figure::Fig9 => {
            let rows = metric_rows(outcome, |r| json!(r.metrics.fidelity));
            json!({ "quantity": "process fidelity", "rows": rows, "symmetric_ge_asymmetric": fig9_ordering(outcome) })
        }
    }
}

/// Pairs (symmetric, asymmetric) results with equal `tau`.
fn pairs(outcome: &RunOutcome) -> Vec<(f64, &PointResult, &PointResult)> {
    let mut out = Vec::new();
    for (p, r) in outcome.points.iter().zip(&outcome.results) {
        if symmetric(p) != Some(true) {
            continue;
        }
        let partner = outcome
            .points
            .iter()
            .zip(&outcome.results)
            .find(|(q, _)| symmetric(q) == Some(false) && tau(q) == tau(p) && family(q) == family(p));
        if let Some((_, ra)) = partner {
            out.push((tau(p), r, ra));
        }
    }
    out
}

pub fn fig3_ordering(outcome: &RunOutcome) -> Option<bool> {
    let ps = pairs(outcome);
    if ps.is_empty() {
        return None;
    }
    let mut ok = true;
    for (_, s, a) in ps {
        match (s.metrics.final_magnetization, a.metrics.final_magnetization) {
            (Some(ms), Some(ma)) => ok &= ms[1] >= ma[1],
            _ => return None,
        }
    }
    Some(ok)
}

pub fn fig9_ordering(outcome: &RunOutcome) -> Option<bool> {
    let ps = pairs(outcome);
    if ps.is_empty() {
        return None;
    }
    let mut ok = true;
    for (_, s, a) in ps {
        let (Some(fs), Some(fa)) = (&s.metrics.fidelity, &a.metrics.fidelity) else {
            return None;
        };
        ok &= fs.iter().zip(fa).all(|(x, y)| x.1 >= y.1);
    }
    Some(ok)
}
