//! Whole-workflow configuration, read from and echoed as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusteringParams;
use crate::error::{Error, Result};
use crate::headselect::HeadParams;
use crate::io::{read_to_string, write_atomic};
use crate::metrics::ThroughputWindow;
use crate::mobility::ArenaConfig;
use crate::netsim::{SimConfig, TopologyConfig};
use crate::predictor::{BoostParams, TargetEncoding, WindowSpec};
use crate::seed;
use crate::traffic::TrafficParams;

/// File name of the config echo written next to every output.
pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    pub encoding: TargetEncoding,
    /// Prediction epoch in seconds; `None` means the last trace sample.
    pub at_time: Option<f64>,
    pub window: WindowSpec,
    pub boost: BoostParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub throughput_window: ThroughputWindow,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            throughput_window: ThroughputWindow::FlowLifetime,
        }
    }
}

/// The per-section `seed` fields are overwritten with values derived from
/// the master `seed`, so one number fixes the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: Option<String>,
    pub mobility: ArenaConfig,
    pub predictor: PredictorConfig,
    pub clustering: ClusteringParams,
    pub heads: HeadParams,
    pub traffic: TrafficParams,
    pub network: TopologyConfig,
    pub metrics: MetricsConfig,
    pub table1: SimConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out_dir: None,
            mobility: ArenaConfig::default(),
            predictor: PredictorConfig::default(),
            clustering: ClusteringParams::default(),
            heads: HeadParams::default(),
            traffic: TrafficParams::default(),
            network: TopologyConfig::default(),
            metrics: MetricsConfig::default(),
            table1: SimConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Writes `config.toml` into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(CONFIG_ECHO), self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        self.mobility.validate()?;
        self.predictor.window.validate()?;
        self.predictor.boost.validate()?;
        self.clustering.validate()?;
        self.heads.validate()?;
        self.traffic.validate()?;
        self.network.validate()?;
        if let ThroughputWindow::Fixed(d) = self.metrics.throughput_window {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config("throughput window must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Same config with a new master seed and all stage seeds re-derived.
    pub fn with_seed(&self, master: u64) -> Self {
        let mut c = self.clone();
        c.seed = master;
        c.mobility.seed = seed::derive_label(master, "mobility");
        c.predictor.boost.seed = seed::derive_label(master, "predictor");
        c.traffic.seed = seed::derive_label(master, "traffic");
        c
    }

    pub fn resolved(&self) -> Self {
        self.with_seed(self.seed)
    }

    pub fn clustering_seed(&self) -> u64 {
        seed::derive_label(self.seed, "clustering")
    }

    pub fn radio_seed(&self) -> u64 {
        seed::derive_label(self.seed, "radio")
    }
}
