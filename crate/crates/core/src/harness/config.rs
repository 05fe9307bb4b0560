use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{sha256_hex, HarnessError, HarnessResult};
use crate::autoencoder::{GridSpec, NetworkShape, TrainConfig};
use crate::ekf::{InitialUncertainty, ProcessNoise};
use crate::geometry::LayoutVariant;
use crate::mapping::{BiasMap, CovarianceMap};
use crate::scenarios::{ScenarioParams, SCENARIO_IDS};
use crate::simulator::{ChannelModel, Obstacle, TrajectorySpec};

/// Which measurement model the filter uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Static,
    AdaptiveNoBias,
    AdaptiveFull,
}

impl ModeKind {
    pub const ALL: [ModeKind; 3] = [Self::Static, Self::AdaptiveNoBias, Self::AdaptiveFull];

    pub fn name(self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::AdaptiveNoBias => "adaptive-no-bias",
            Self::AdaptiveFull => "adaptive-full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn needs_model(self) -> bool {
        self != Self::Static
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    pub variant: LayoutVariant,
}

impl Default for LayoutSection {
    fn default() -> Self {
        Self {
            variant: LayoutVariant::Hexagon6,
        }
    }
}

/// Obstacle strengths of the built-in scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleSection {
    pub plate_bias: f64,
    pub cabinet_bias: f64,
    pub plate_distance: f64,
    pub plate_width: f64,
}

impl Default for ObstacleSection {
    fn default() -> Self {
        let p = ScenarioParams::default();
        Self {
            plate_bias: p.plate_bias,
            cabinet_bias: p.cabinet_bias,
            plate_distance: p.plate_distance,
            plate_width: p.plate_width,
        }
    }
}

/// A user-defined scenario, used by `simulate --custom`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomScenario {
    #[serde(flatten)]
    pub spec: TrajectorySpec,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapsSection {
    pub covariance: CovarianceMap,
    pub bias: BiasMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EkfSection {
    pub static_variance: f64,
    pub process_noise: ProcessNoise,
    pub initial: InitialUncertainty,
}

impl Default for EkfSection {
    fn default() -> Self {
        Self {
            static_variance: 0.01,
            process_noise: ProcessNoise::default(),
            initial: InitialUncertainty::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// `[e1, e2, d1]`; defaults to 15/30/15.
    pub hidden: Option<[usize; 3]>,
    pub grid: GridSpec,
}

impl Default for TrainSection {
    fn default() -> Self {
        let c = TrainConfig::default();
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            hidden: None,
            grid: GridSpec::default(),
        }
    }
}

impl TrainSection {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            rng_seed: seed,
            ..TrainConfig::default()
        }
    }

    pub fn shape(&self, n_in: usize) -> NetworkShape {
        match self.hidden {
            Some([e1, e2, d1]) => NetworkShape {
                n_in,
                n_e1: e1,
                n_e2: e2,
                n_d1: d1,
            },
            None => NetworkShape::default_for(n_in),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    /// Number of consecutive seeds, starting at `seed`, swept by `ablate`.
    pub seeds: u64,
    pub scenarios: Vec<u8>,
    pub layouts: Vec<LayoutVariant>,
    pub modes: Vec<ModeKind>,
    /// Seconds a missing reading may be held before the anchor is masked.
    pub staleness: f64,
    /// Heatmap resolution over the arena.
    pub heatmap_cells: [usize; 2],
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: 3,
            scenarios: SCENARIO_IDS.to_vec(),
            layouts: LayoutVariant::ALL.to_vec(),
            modes: ModeKind::ALL.to_vec(),
            staleness: 0.5,
            heatmap_cells: [4, 4],
        }
    }
}

/// Everything a command needs, loaded from a TOML file. Every section and
/// key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub layout: LayoutSection,
    pub channel: ChannelModel,
    pub obstacles: ObstacleSection,
    pub trajectory: Option<CustomScenario>,
    pub maps: MapsSection,
    pub ekf: EkfSection,
    pub train: TrainSection,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> HarnessResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> HarnessResult<()> {
        let cfg = |e: crate::Error| HarnessError::Config(e.to_string());
        self.channel.validate().map_err(cfg)?;
        self.maps.covariance.validate().map_err(cfg)?;
        self.maps.bias.validate().map_err(cfg)?;
        self.ekf.process_noise.validate().map_err(cfg)?;
        self.train.config(0).validate().map_err(cfg)?;
        if !(self.ekf.static_variance > 0.0) {
            return Err(HarnessError::Config(
                "ekf.static_variance must be positive".into(),
            ));
        }
        let o = &self.obstacles;
        if [o.plate_bias, o.cabinet_bias, o.plate_distance]
            .iter()
            .any(|v| !(*v >= 0.0))
            || !(o.plate_width > 0.0)
        {
            return Err(HarnessError::Config(
                "obstacle biases and distances must be >= 0, plate_width > 0".into(),
            ));
        }
        let e = &self.experiment;
        if let Some(bad) = e.scenarios.iter().find(|s| !SCENARIO_IDS.contains(s)) {
            return Err(HarnessError::Config(format!("unknown scenario {bad}")));
        }
        if e.seeds == 0 || e.scenarios.is_empty() || e.layouts.is_empty() || e.modes.is_empty() {
            return Err(HarnessError::Config(
                "experiment needs at least one seed, scenario, layout and mode".into(),
            ));
        }
        if !(e.staleness >= 0.0) {
            return Err(HarnessError::Config(
                "experiment.staleness must be >= 0".into(),
            ));
        }
        if e.heatmap_cells.contains(&0) {
            return Err(HarnessError::Config(
                "heatmap_cells must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn scenario_params(&self) -> ScenarioParams {
        ScenarioParams {
            channel: self.channel.clone(),
            plate_bias: self.obstacles.plate_bias,
            cabinet_bias: self.obstacles.cabinet_bias,
            plate_distance: self.obstacles.plate_distance,
            plate_width: self.obstacles.plate_width,
        }
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        sha256_hex(&json)
    }
}
