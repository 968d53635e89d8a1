//! JSON schemas of the experiment configs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use fopid_ncs::studies::bound_sweep;
use fopid_ncs::{
    Algorithm, Band, ChannelConfig, ControllerSpec, CostWeights, DelayLaw, PlantSpec, SearchBox, SimConfig, StepInput,
    TuneMode,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub fn load<C: DeserializeOwned>(path: &Path) -> anyhow::Result<C> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// 10 s, disturbance at 5 s.
    #[default]
    P1,
    /// 40 s, disturbance at 20 s.
    P2,
}

/// Loop settings on top of a default experiment shape. `network` applies to
/// both paths; `sc_channel`/`ca_channel` override a single path.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub shape: Shape,
    pub ts: Option<f64>,
    pub horizon: Option<f64>,
    pub substeps: Option<usize>,
    pub setpoint_step: Option<StepInput>,
    pub load_disturbance: Option<StepInput>,
    pub network: Option<ChannelConfig>,
    pub sc_channel: Option<ChannelConfig>,
    pub ca_channel: Option<ChannelConfig>,
    pub tso_enabled: Option<bool>,
}

impl SimSection {
    pub fn resolve(&self) -> SimConfig {
        let ideal = ChannelConfig::ideal();
        let mut cfg = match self.shape {
            Shape::P1 => SimConfig::p1(ideal, ideal),
            Shape::P2 => SimConfig::p2(ideal, ideal),
        };
        if let Some(n) = self.network {
            cfg = cfg.with_network(n);
        }
        if let Some(c) = self.sc_channel {
            cfg.sc_channel = c;
        }
        if let Some(c) = self.ca_channel {
            cfg.ca_channel = c;
        }
        cfg.ts = self.ts.unwrap_or(cfg.ts);
        cfg.horizon = self.horizon.unwrap_or(cfg.horizon);
        cfg.substeps = self.substeps.unwrap_or(cfg.substeps);
        cfg.setpoint_step = self.setpoint_step.unwrap_or(cfg.setpoint_step);
        cfg.load_disturbance = self.load_disturbance.unwrap_or(cfg.load_disturbance);
        cfg.tso_enabled = self.tso_enabled.unwrap_or(cfg.tso_enabled);
        cfg
    }
}

fn default_replicates() -> usize {
    5
}

fn default_study_replicates() -> usize {
    20
}

/// Inline controller or a `result.json` written by `tune`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSource {
    pub controller: Option<ControllerSpec>,
    pub controller_from: Option<PathBuf>,
}

impl ControllerSource {
    /// Relative `controller_from` paths are taken from the config's directory.
    pub fn resolve(&self, config_dir: &Path) -> anyhow::Result<ControllerSpec> {
        match (&self.controller, &self.controller_from) {
            (Some(c), None) => Ok(*c),
            (None, Some(p)) => {
                let path = if p.is_absolute() { p.clone() } else { config_dir.join(p) };
                let result: TuneRecordController = load(&path)?;
                Ok(result.controller)
            }
            (Some(_), Some(_)) => bail!("give either `controller` or `controller_from`, not both"),
            (None, None) => bail!("missing `controller` (or `controller_from`)"),
        }
    }
}

#[derive(Deserialize)]
struct TuneRecordController {
    controller: ControllerSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub plant: PlantSpec,
    pub mode: TuneMode,
    pub optimizer: Algorithm<f64>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub weights: CostWeights<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub band: Band<f64>,
    pub bounds: Option<SearchBox<f64>>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub plant: PlantSpec,
    pub controller: Option<ControllerSpec>,
    pub controller_from: Option<PathBuf>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub weights: CostWeights<f64>,
    /// Replicates in `cost.json`; `trace.csv` holds the first one.
    #[serde(default = "one")]
    pub replicates: usize,
    pub seed: Option<u64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Gains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Explicit values or `steps` evenly spaced points from `start` to `stop`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, steps: usize },
}

impl Grid {
    pub fn values(&self) -> anyhow::Result<Vec<f64>> {
        let v = match *self {
            Grid::Values(ref v) => v.clone(),
            Grid::Range { start, stop, steps } => match steps {
                0 => vec![],
                1 => vec![start],
                n => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
            },
        };
        if v.is_empty() {
            bail!("grid is empty");
        }
        if v.iter().any(|x| !(0.0..=2.0).contains(x)) {
            bail!("grid values must lie in [0, 2]");
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub plant: PlantSpec,
    pub gains: Gains,
    pub lambda: Grid,
    pub mu: Grid,
    #[serde(default)]
    pub band: Band<f64>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub weights: CostWeights<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: Option<u64>,
}

fn default_ts() -> f64 {
    0.01
}

fn default_true() -> bool {
    true
}

fn default_bins() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelAuditConfig {
    pub channel: ChannelConfig,
    pub packets: u64,
    #[serde(default = "default_ts")]
    pub ts: f64,
    #[serde(default = "default_true")]
    pub tso_enabled: bool,
    #[serde(default = "default_bins")]
    pub bins: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct BoundSweep {
    pub step: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationConfig {
    pub plant: PlantSpec,
    pub controller: Option<ControllerSpec>,
    pub controller_from: Option<PathBuf>,
    #[serde(default)]
    pub sim: SimSection,
    pub static_delays: Option<Vec<f64>>,
    pub uniform_bounds: Option<Vec<f64>>,
    /// Fills both delay lists with `step, 2 step, ..., count step`.
    pub sweep: Option<BoundSweep>,
    #[serde(default)]
    pub drop_prob: f64,
    #[serde(default = "default_study_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub weights: CostWeights<f64>,
    pub seed: Option<u64>,
}

impl DegradationConfig {
    pub fn levels(&self) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
        let swept = self.sweep.map(|s| bound_sweep(s.step, s.count)).unwrap_or_default();
        let statics = self.static_delays.clone().unwrap_or_else(|| swept.clone());
        let uniforms = self.uniform_bounds.clone().unwrap_or(swept);
        if statics.is_empty() && uniforms.is_empty() {
            bail!("no delay levels: give `static_delays`, `uniform_bounds` or `sweep`");
        }
        Ok((statics, uniforms))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferConfig {
    pub plant: PlantSpec,
    pub controller: Option<ControllerSpec>,
    pub controller_from: Option<PathBuf>,
    #[serde(default)]
    pub sim: SimSection,
    pub channel: ChannelConfig,
    #[serde(default = "default_study_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub weights: CostWeights<f64>,
    pub seed: Option<u64>,
}

fn default_delay_bound() -> f64 {
    0.1
}

fn default_robustness_drop() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    pub plant: PlantSpec,
    pub controller: Option<ControllerSpec>,
    pub controller_from: Option<PathBuf>,
    #[serde(default)]
    pub sim: SimSection,
    /// Defaults to uniform, truncated normal and truncated exponential laws
    /// on `[0, delay_bound]`.
    pub laws: Option<Vec<DelayLaw>>,
    #[serde(default = "default_delay_bound")]
    pub delay_bound: f64,
    #[serde(default = "default_robustness_drop")]
    pub drop_prob: f64,
    #[serde(default = "default_study_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub weights: CostWeights<f64>,
    pub seed: Option<u64>,
}

/// Controller of a config that carries `controller`/`controller_from`.
pub fn controller_of(
    inline: Option<ControllerSpec>,
    from: Option<PathBuf>,
    config_path: &Path,
) -> anyhow::Result<ControllerSpec> {
    let dir = config_path.parent().unwrap_or(Path::new("."));
    ControllerSource { controller: inline, controller_from: from }.resolve(dir)
}
