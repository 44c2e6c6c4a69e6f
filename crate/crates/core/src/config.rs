//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [topology]
//! layout = "single_orbit"
//! n_sats = 20
//! n_air = 100
//! devices_per_air = 2
//!
//! [data]
//! n_classes = 10
//! classes_per_device = 2
//! samples_per_device = 40
//! dim = 10
//!
//! [training]
//! eta = 0.1
//! tau1 = 5
//! tau2 = 2
//! global_rounds = 30
//!
//! [policy]
//! kind = "cnasa"
//! n_geo = 4
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::data::DataConfig;
use crate::fl::learner::LearnerKind;
use crate::timecost::{SyncAlgo, REFERENCE_FLOPS};
use crate::topology::{build_single_orbit, build_walker, Channel, LinkClass, LinkParams, LinkTable, NetworkTopology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Weight between time and divergence in the assignment objective;
    /// reported only, `n_geo` is the working knob.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Run directory below the output root.
    #[serde(default)]
    pub output_dir: Option<String>,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub links: LinksConfig,
    pub data: DataConfig,
    pub training: TrainingConfig,
    pub policy: Policy,
    #[serde(default)]
    pub timing: TimingConfig,
}

fn default_gamma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    SingleOrbit {
        n_sats: usize,
        #[serde(default = "default_altitude")]
        altitude_km: f64,
        n_air: usize,
        devices_per_air: usize,
    },
    Walker {
        n_planes: usize,
        sats_per_plane: usize,
        #[serde(default = "default_inclination")]
        inclination_deg: f64,
        #[serde(default = "default_altitude")]
        altitude_km: f64,
        air_per_cell: usize,
        devices_per_air: usize,
    },
}

fn default_altitude() -> f64 {
    330.0
}

fn default_inclination() -> f64 {
    85.0
}

impl TopologyConfig {
    pub fn build(&self, links: LinkTable) -> Result<NetworkTopology> {
        match *self {
            TopologyConfig::SingleOrbit {
                n_sats,
                altitude_km,
                n_air,
                devices_per_air,
            } => build_single_orbit(n_sats, altitude_km, n_air, devices_per_air, links),
            TopologyConfig::Walker {
                n_planes,
                sats_per_plane,
                inclination_deg,
                altitude_km,
                air_per_cell,
                devices_per_air,
            } => build_walker(
                n_planes,
                sats_per_plane,
                inclination_deg,
                altitude_km,
                air_per_cell,
                devices_per_air,
                links,
            ),
        }
    }

    pub fn n_sats(&self) -> usize {
        match *self {
            TopologyConfig::SingleOrbit { n_sats, .. } => n_sats,
            TopologyConfig::Walker {
                n_planes,
                sats_per_plane,
                ..
            } => n_planes * sats_per_plane,
        }
    }

    pub fn n_air(&self) -> usize {
        match *self {
            TopologyConfig::SingleOrbit { n_air, .. } => n_air,
            TopologyConfig::Walker { air_per_cell, .. } => air_per_cell * self.n_sats(),
        }
    }

    pub fn devices_per_air(&self) -> usize {
        match *self {
            TopologyConfig::SingleOrbit { devices_per_air, .. } | TopologyConfig::Walker { devices_per_air, .. } => {
                devices_per_air
            }
        }
    }
}

/// One link class as written in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub channel: Channel,
    pub prop_delay_s: f64,
}

/// Optional per-class overrides of the reference link table.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinksConfig {
    pub sat_ground: Option<LinkConfig>,
    pub ground_air: Option<LinkConfig>,
    pub air_sat: Option<LinkConfig>,
    pub sat_sat: Option<LinkConfig>,
}

impl LinksConfig {
    pub fn table(&self) -> Result<LinkTable> {
        let mut t = LinkTable::reference();
        let set = |slot: &mut LinkParams, class: LinkClass, cfg: Option<LinkConfig>| {
            if let Some(c) = cfg {
                *slot = LinkParams {
                    class,
                    channel: c.channel,
                    prop_delay_s: c.prop_delay_s,
                };
            }
        };
        set(&mut t.sat_ground, LinkClass::SatGround, self.sat_ground);
        set(&mut t.ground_air, LinkClass::GroundAir, self.ground_air);
        set(&mut t.air_sat, LinkClass::AirSat, self.air_sat);
        set(&mut t.sat_sat, LinkClass::SatSat, self.sat_sat);
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub eta: f64,
    #[serde(default)]
    pub lambda: f64,
    pub tau1: usize,
    pub tau2: usize,
    pub global_rounds: usize,
    #[serde(default)]
    pub learner: LearnerKind,
    /// Mini-batch size; full local data when absent.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub sync_algo: SyncAlgo,
    /// Average on air nodes before the satellite.
    #[serde(default = "yes")]
    pub air_first: bool,
    /// Divergence and bound estimates per global interval.
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default)]
    pub precision: Precision,
}

fn yes() -> bool {
    true
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::config("training.eta", "must be finite and >= 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("training.lambda", "must be finite and >= 0"));
        }
        if self.tau1 == 0 {
            return Err(Error::config("training.tau1", "must be at least 1"));
        }
        if self.tau2 == 0 {
            return Err(Error::config("training.tau2", "must be at least 1"));
        }
        if self.global_rounds == 0 {
            return Err(Error::config("training.global_rounds", "must be at least 1"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::config("training.batch_size", "must be at least 1"));
        }
        if let LearnerKind::Mlp { hidden: 0 } = self.learner {
            return Err(Error::config("training.learner.hidden", "must be at least 1"));
        }
        Ok(())
    }
}

/// Air-node to satellite assignment policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Policy {
    Gdo,
    Cdo,
    Cnasa { n_geo: usize },
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Gdo => f.write_str("gdo"),
            Policy::Cdo => f.write_str("cdo"),
            Policy::Cnasa { n_geo } => write!(f, "cnasa-{n_geo}"),
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    /// `gdo`, `cdo`, or `cnasa-<n_geo>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gdo" => Ok(Policy::Gdo),
            "cdo" => Ok(Policy::Cdo),
            other => other
                .strip_prefix("cnasa-")
                .and_then(|n| n.parse().ok())
                .map(|n_geo| Policy::Cnasa { n_geo })
                .ok_or_else(|| Error::config("policy", format!("unknown policy `{s}`"))),
        }
    }
}

/// Processing rates and model size used by the time model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    #[serde(default = "reference_flops")]
    pub flops_device: f64,
    #[serde(default = "reference_flops")]
    pub flops_air: f64,
    #[serde(default = "reference_flops")]
    pub flops_sat: f64,
    #[serde(default = "default_bits")]
    pub bits_per_param: u32,
    /// Parameter count charged for transfers; the learner's own count when
    /// absent.
    #[serde(default)]
    pub model_params: Option<usize>,
    /// FLOPs per training sample; derived from the learner when absent.
    #[serde(default)]
    pub flops_per_sample: Option<f64>,
}

fn reference_flops() -> f64 {
    REFERENCE_FLOPS
}

fn default_bits() -> u32 {
    32
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            flops_device: REFERENCE_FLOPS,
            flops_air: REFERENCE_FLOPS,
            flops_sat: REFERENCE_FLOPS,
            bits_per_param: 32,
            model_params: None,
            flops_per_sample: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .map(str::to_owned)
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.to_string().trim().to_owned())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every block and builds the topology, without deriving links
    /// or data.
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() {
            return Err(Error::config("gamma", "must be finite"));
        }
        self.topology.build(self.links.table()?)?;
        self.data.validate()?;
        self.training.validate()?;
        if let Policy::Cnasa { n_geo } = self.policy {
            if n_geo == 0 || n_geo > self.topology.n_sats() {
                return Err(Error::config(
                    "policy.n_geo",
                    format!("must lie in 1..={}", self.topology.n_sats()),
                ));
            }
        }
        let t = &self.timing;
        for (field, v) in [
            ("timing.flops_device", t.flops_device),
            ("timing.flops_air", t.flops_air),
            ("timing.flops_sat", t.flops_sat),
            ("timing.flops_per_sample", t.flops_per_sample.unwrap_or(1.0)),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if t.model_params == Some(0) {
            return Err(Error::config("timing.model_params", "must be at least 1"));
        }
        Ok(())
    }
}
