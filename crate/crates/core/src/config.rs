//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::oracle::{OracleCaps, PhaseThresholds};
use crate::qmath::{c, CMatrix, DensityMatrix};
use crate::scatter::{DistributionKind, ScatteringGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Decoherence,
    Overlap,
    Plateau,
    Bounds,
    Pfcast,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Decoherence => "decoherence",
            Command::Overlap => "overlap",
            Command::Plateau => "plateau",
            Command::Bounds => "bounds",
            Command::Pfcast => "pfcast",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum TimeGrid {
    Explicit { values: Vec<f64> },
    Linear { start: f64, stop: f64, points: usize },
}

impl TimeGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            TimeGrid::Explicit { values } => values.clone(),
            TimeGrid::Linear { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n).map(|i| start + (stop - start) * i as f64 / (*n - 1) as f64).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fractions {
    /// Observed fractions for the plateau curve.
    #[serde(default = "default_fs")]
    pub f: Vec<f64>,
    /// Macrofraction size as a fraction of all photons.
    #[serde(default = "default_m")]
    pub m: f64,
    /// Observed fraction used for the decoherence factor.
    #[serde(default)]
    pub decoherence_f: f64,
}

fn default_fs() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

fn default_m() -> f64 {
    0.25
}

impl Default for Fractions {
    fn default() -> Self {
        Self { f: default_fs(), m: default_m(), decoherence_f: 0.0 }
    }
}

/// Initial system state in the pointer basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemState {
    pub p1: f64,
    /// `|c12|`.
    pub coherence: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Default for SystemState {
    fn default() -> Self {
        Self { p1: 0.5, coherence: 0.5, phase: 0.0 }
    }
}

impl SystemState {
    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        if !(0.0..=1.0).contains(&self.p1) {
            return Err(Error::config("system.p1", format!("{} outside [0, 1]", self.p1)));
        }
        let p2 = 1.0 - self.p1;
        if self.coherence < 0.0 || self.coherence > (self.p1 * p2).sqrt() + 1e-12 {
            return Err(Error::config("system.coherence", "must lie in [0, sqrt(p1 p2)]"));
        }
        let c12 = num_complex::Complex64::from_polar(self.coherence, self.phase);
        DensityMatrix::new(CMatrix::from_row_slice(2, 2, &[c(self.p1, 0.0), c12, c12.conj(), c(p2, 0.0)]))
    }
}

/// Photon model handed to the exact oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleModel {
    /// Qubit photons with `S_1 = 1` and `S_2 = exp(-i angle Y / 2)`.
    QubitRotation { env: [f64; 2], angle: f64 },
    /// Haar-random `S_1, S_2` and a random photon state, seeded by the run seed.
    Random {
        photon_dim: usize,
        #[serde(default = "default_rank")]
        env_rank: usize,
    },
    /// The discretized shell model of the geometry and distribution blocks.
    ShellModel,
}

fn default_rank() -> usize {
    1
}

impl Default for OracleModel {
    fn default() -> Self {
        OracleModel::QubitRotation { env: [0.999, 0.001], angle: 0.95 * std::f64::consts::PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    #[serde(default)]
    pub model: OracleModel,
    /// Photons scattered in total; falls back to the photon count at the
    /// last time of the time grid.
    #[serde(default)]
    pub n_t: Option<usize>,
    #[serde(default)]
    pub caps: OracleCaps,
    /// Also compute the distance to the nearest broadcast form.
    #[serde(default = "yes")]
    pub distance: bool,
}

fn yes() -> bool {
    true
}

impl Default for OracleBlock {
    fn default() -> Self {
        Self { model: OracleModel::default(), n_t: None, caps: OracleCaps::default(), distance: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default)]
    pub phase: PhaseThresholds,
    /// Slack below `-slack_tol` counts as a bound violation.
    #[serde(default = "default_slack_tol")]
    pub slack_tol: f64,
    /// Largest allowed deviation of the broadcast pointer spectrum.
    #[serde(default = "default_pf_tol")]
    pub pf_tol: f64,
}

fn default_slack_tol() -> f64 {
    1e-9
}

fn default_pf_tol() -> f64 {
    1e-10
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { phase: PhaseThresholds::default(), slack_tol: default_slack_tol(), pf_tol: default_pf_tol() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_trials() -> usize {
    100
}

impl Default for BoundsBlock {
    fn default() -> Self {
        Self { trials: default_trials() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PfcastBlock {
    /// Random bases to test; the pointer and Hadamard bases are always included.
    #[serde(default = "default_bases")]
    pub bases: usize,
    /// Observed fraction of the channel records.
    #[serde(default = "default_pf_f")]
    pub f: f64,
}

fn default_pf_f() -> f64 {
    0.5
}

fn default_bases() -> usize {
    20
}

impl Default for PfcastBlock {
    fn default() -> Self {
        Self { bases: default_bases(), f: default_pf_f() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the config, e.g. `geometry.displacement`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub command: Command,
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub geometry: Option<ScatteringGeometry>,
    #[serde(default)]
    pub distribution: Option<DistributionKind>,
    /// Replace the computed `alpha` by a fixed value.
    #[serde(default)]
    pub alpha_override: Option<f64>,
    #[serde(default)]
    pub time: Option<TimeGrid>,
    #[serde(default)]
    pub fractions: Fractions,
    #[serde(default)]
    pub system: SystemState,
    #[serde(default)]
    pub oracle: OracleBlock,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub bounds: BoundsBlock,
    #[serde(default)]
    pub pfcast: PfcastBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        Self::from_json_str(&value.to_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.geometry {
            g.validate().map_err(|e| Error::config("geometry", e.to_string()))?;
        }
        if let Some(a) = self.alpha_override {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::config("alpha_override", format!("{a} outside [0, 1]")));
            }
        }
        if let Some(TimeGrid::Linear { start, stop, .. }) = &self.time {
            if !(start.is_finite() && stop.is_finite() && *start >= 0.0 && stop >= start) {
                return Err(Error::config("time", "need 0 <= start <= stop"));
            }
        }
        if let Some(TimeGrid::Explicit { values }) = &self.time {
            if let Some(i) = values.iter().position(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(Error::config(format!("time.values[{i}]"), "times must be finite and nonnegative"));
            }
        }
        for (i, f) in self.fractions.f.iter().enumerate() {
            if !(0.0..=1.0).contains(f) {
                return Err(Error::config(format!("fractions.f[{i}]"), format!("{f} outside [0, 1]")));
            }
        }
        if !(self.fractions.m > 0.0 && self.fractions.m <= 1.0) {
            return Err(Error::config("fractions.m", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.fractions.decoherence_f) {
            return Err(Error::config("fractions.decoherence_f", "must lie in [0, 1]"));
        }
        self.system.density_matrix()?;
        match &self.oracle.model {
            OracleModel::QubitRotation { env, .. } => {
                if env.iter().any(|p| *p < 0.0) || (env[0] + env[1] - 1.0).abs() > 1e-12 {
                    return Err(Error::config("oracle.env", "photon populations must be a distribution"));
                }
            }
            OracleModel::Random { photon_dim, env_rank } => {
                if *photon_dim < 1 || *env_rank < 1 || env_rank > photon_dim {
                    return Err(Error::config("oracle", "need 1 <= env_rank <= photon_dim"));
                }
            }
            OracleModel::ShellModel => {}
        }
        let th = self.thresholds.phase;
        if !(th.product >= 0.0 && th.broadcast >= 0.0) {
            return Err(Error::config("thresholds.phase", "thresholds must be nonnegative"));
        }
        if let Some(s) = &self.sweep {
            if s.command == Command::Sweep {
                return Err(Error::config("sweep.command", "a sweep cannot run sweeps"));
            }
            for (i, a) in s.axes.iter().enumerate() {
                if a.values.is_empty() {
                    return Err(Error::config(format!("sweep.axes[{i}].values"), "axis has no values"));
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<&ScatteringGeometry> {
        self.geometry.as_ref().ok_or_else(|| Error::config("geometry", "required for this command"))
    }

    pub fn distribution(&self) -> Result<&DistributionKind> {
        self.distribution.as_ref().ok_or_else(|| Error::config("distribution", "required for this command"))
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        self.time.as_ref().map(TimeGrid::values).ok_or_else(|| Error::config("time", "required for this command"))
    }
}

/// Set `path` (dot separated, numeric segments index arrays) inside `root`,
/// creating objects along the way.
pub fn set_dotted(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert((*part).to_string(), value);
                    return Ok(());
                }
                map.entry((*part).to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| Error::config(path, format!("`{part}` is not an index")))?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| Error::config(path, format!("index {idx} out of {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::config(path, format!("`{part}` does not address an object or array"))),
        };
    }
    Err(Error::config(path, "empty path"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_json_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.bounds.trials, 100);
        assert_eq!(cfg.fractions.f, vec![0.25, 0.5, 0.75]);
        assert_eq!(cfg.oracle.caps.assembled, 1 << 14);
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::from_json_str(r#"{"seed": 1, "geometry": {"radius": "x"}}"#).unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "geometry.radius"),
            e => panic!("unexpected {e}"),
        }
        let err = RunConfig::from_json_str(r#"{"seed": 1, "fractions": {"f": [0.5, 1.5]}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "fractions.f[1]"));
        assert!(RunConfig::from_json_str(r#"{"seed": 1, "bogus": 2}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{}"#).is_err());
    }

    #[test]
    fn oracle_models_parse() {
        let cfg = RunConfig::from_json_str(r#"{"seed": 1, "oracle": {"model": {"kind": "random", "photon_dim": 3}, "n_t": 4}}"#).unwrap();
        assert_eq!(cfg.oracle.model, OracleModel::Random { photon_dim: 3, env_rank: 1 });
        assert_eq!(cfg.oracle.n_t, Some(4));
        let cfg = RunConfig::from_json_str(r#"{"seed": 1, "oracle": {"model": {"kind": "shell_model"}}}"#).unwrap();
        assert_eq!(cfg.oracle.model, OracleModel::ShellModel);
    }

    #[test]
    fn time_grids() {
        let g = TimeGrid::Linear { start: 0.0, stop: 1.0, points: 5 };
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let cfg = RunConfig::from_json_str(r#"{"seed": 1, "time": {"values": [1, 2]}}"#).unwrap();
        assert_eq!(cfg.times().unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn dotted_paths() {
        let mut v = serde_json::json!({"geometry": {"displacement": 1.0}, "fractions": {"f": [0.1, 0.2]}});
        set_dotted(&mut v, "geometry.displacement", 2.0.into()).unwrap();
        set_dotted(&mut v, "fractions.f.1", 0.7.into()).unwrap();
        set_dotted(&mut v, "bounds.trials", 5.into()).unwrap();
        assert_eq!(v["geometry"]["displacement"], 2.0);
        assert_eq!(v["fractions"]["f"][1], 0.7);
        assert_eq!(v["bounds"]["trials"], 5);
        assert!(set_dotted(&mut v, "fractions.f.9", 1.into()).is_err());
    }
}
