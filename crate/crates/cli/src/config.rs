use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vehval_core::dynamics::{AxleTires, CandidateModel, ModelId, PacejkaTire, VehicleParams};
use vehval_core::plant::{
    default_suite, ManeuverSpec, PlantParams, RoadProfile, SensorNoise, SpeedController,
};
use vehval_core::validity::DEFAULT_THRESHOLD;

use crate::CliError;

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "VEHVAL_OUT";
pub const DEFAULT_OUT: &str = "vehval-out";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MU: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    /// Named parameter set; ignored when `params` is given.
    pub preset: Option<String>,
    pub params: Option<VehicleParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TireConfig {
    /// Road friction coefficient seen by the plant and assumed by the models.
    pub mu: f64,
    /// Pacejka law at unit friction; defaults to the passenger-car set.
    pub pacejka: Option<PacejkaTire>,
    /// Explicit axle tires per model, keyed by model name.
    pub overrides: BTreeMap<String, AxleTires>,
}

impl Default for TireConfig {
    fn default() -> Self {
        Self {
            mu: DEFAULT_MU,
            pacejka: None,
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub count: usize,
    /// Smallest and largest requested peak |a_y| [m/s^2].
    pub ay_min: f64,
    pub ay_max: f64,
    /// [s]
    pub duration: f64,
    /// Explicit maneuvers; replace the generated suite when non-empty.
    pub maneuvers: Vec<ManeuverSpec>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            count: 28,
            ay_min: 2.0,
            ay_max: 10.1,
            duration: 30.0,
            maneuvers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Domain threshold [m/s^2].
    pub threshold: f64,
    /// Worker threads; 0 uses every logical core.
    pub jobs: usize,
    /// Model names; empty selects all four.
    pub models: Vec<String>,
    pub vehicle: VehicleConfig,
    pub tires: TireConfig,
    pub noise: SensorNoise,
    pub controller: SpeedController,
    pub road: Option<RoadProfile>,
    pub suite: SuiteConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            out: None,
            threshold: DEFAULT_THRESHOLD,
            jobs: 0,
            models: Vec::new(),
            vehicle: VehicleConfig::default(),
            tires: TireConfig::default(),
            noise: SensorNoise::default(),
            controller: SpeedController::default(),
            road: None,
            suite: SuiteConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.vehicle_params()?;
        self.model_ids()?;
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(format!(
                "threshold must be positive, got {}",
                self.threshold
            ));
        }
        if !(self.tires.mu > 0.0 && self.tires.mu.is_finite()) {
            return Err(format!("tires.mu must be positive, got {}", self.tires.mu));
        }
        self.noise.validate().map_err(|e| e.to_string())?;
        self.plant_params()?.validate().map_err(|e| e.to_string())?;
        for m in self.suite_specs() {
            m.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    /// Output directory: `flag`, then the environment, then the config file.
    pub fn resolve_out(&self, flag: Option<&Path>, env: Option<&str>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
            .or_else(|| self.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn vehicle_params(&self) -> Result<VehicleParams, String> {
        let v = match (&self.vehicle.params, &self.vehicle.preset) {
            (Some(p), _) => *p,
            (None, Some(name)) => VehicleParams::preset(name)
                .ok_or_else(|| format!("unknown vehicle preset '{name}'"))?,
            (None, None) => VehicleParams::audi_a6(),
        };
        v.validate().map_err(|e| e.to_string())?;
        Ok(v)
    }

    pub fn model_ids(&self) -> Result<Vec<ModelId>, String> {
        if self.models.is_empty() {
            return Ok(ModelId::ALL.to_vec());
        }
        let mut ids = self
            .models
            .iter()
            .map(|s| s.trim().parse::<ModelId>())
            .collect::<Result<Vec<_>, _>>()?;
        ids.sort();
        ids.dedup();
        Ok(ids)
    }

    /// Pacejka law at unit friction.
    pub fn unit_tire(&self) -> PacejkaTire {
        self.tires
            .pacejka
            .unwrap_or_else(|| PacejkaTire::passenger_car(1.0))
    }

    pub fn road(&self) -> RoadProfile {
        self.road
            .clone()
            .unwrap_or_else(|| RoadProfile::flat(self.tires.mu))
    }

    pub fn plant_params(&self) -> Result<PlantParams, String> {
        let mut p = PlantParams::new(self.vehicle_params()?, self.road());
        p.tire = self.unit_tire();
        Ok(p)
    }

    pub fn candidate_models(&self) -> Result<Vec<CandidateModel>, String> {
        let vehicle = self.vehicle_params()?;
        let mu = self.tires.mu;
        let pacejka = self.unit_tire().scaled(mu);
        for key in self.tires.overrides.keys() {
            key.parse::<ModelId>()?;
        }
        self.model_ids()?
            .into_iter()
            .map(|id| {
                let explicit = self
                    .tires
                    .overrides
                    .iter()
                    .find(|(k, _)| k.parse::<ModelId>().ok() == Some(id))
                    .map(|(_, t)| *t);
                match explicit {
                    Some(tires) => CandidateModel::new(id, vehicle, tires),
                    None => CandidateModel::standard(id, vehicle, &pacejka, mu),
                }
                .map_err(|e| format!("{id}: {e}"))
            })
            .collect()
    }

    pub fn suite_specs(&self) -> Vec<ManeuverSpec> {
        if self.suite.maneuvers.is_empty() {
            default_suite(
                self.seed,
                self.suite.count,
                self.suite.ay_min,
                self.suite.ay_max,
                self.suite.duration,
            )
        } else {
            self.suite.maneuvers.clone()
        }
    }

    /// SHA-256 of the settings that influence results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.jobs = 0;
        let text = toml::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
