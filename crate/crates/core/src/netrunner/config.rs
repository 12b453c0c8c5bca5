use serde::{Deserialize, Serialize};

use super::demand::DemandSpec;
use super::topology::{LinkSpec, NodeSpec, TopologySpec};
use super::NetError;
use crate::fabric::PhysicsConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    HubAndSpoke {
        end_nodes: u32,
        km: f64,
        units: usize,
    },
    Chain {
        km: f64,
        units: usize,
    },
    Custom {
        nodes: Vec<NodeSpec>,
        links: Vec<LinkSpec>,
    },
}

/// Axes of a sweep; each cell runs `demand.repetitions` seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    pub units: Vec<usize>,
    pub rates: Vec<f64>,
}

/// An experiment description as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub demand: DemandSpec,
    /// Base seed; repetition `i` runs with `seed + i`.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Keep simulating past the duration until every request completes.
    #[serde(default)]
    pub drain: bool,
    #[serde(default)]
    pub sweep: Option<SweepAxes>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| NetError::Config {
                path: e.path().to_string(),
                msg: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let cfg_err = |path: &str, msg: String| NetError::Config {
            path: path.into(),
            msg,
        };
        self.physics.validate().map_err(|m| cfg_err("physics", m))?;
        self.demand.validate().map_err(|m| cfg_err("demand", m))?;
        if let Some(s) = &self.sweep {
            if s.units.is_empty() || s.units.contains(&0) {
                return Err(cfg_err(
                    "sweep.units",
                    "must be a non-empty list of positive counts".into(),
                ));
            }
            if s.rates.is_empty() || s.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(cfg_err(
                    "sweep.rates",
                    "must be a non-empty list of rates >= 0".into(),
                ));
            }
        }
        super::topology::Network::build(&self.topology_spec())
            .map_err(|e| cfg_err("topology", e.to_string()))?;
        Ok(())
    }

    pub fn topology_spec(&self) -> TopologySpec {
        let mut t = match &self.topology {
            TopologyConfig::HubAndSpoke {
                end_nodes,
                km,
                units,
            } => TopologySpec::hub_and_spoke(*end_nodes, *km, *units),
            TopologyConfig::Chain { km, units } => TopologySpec::chain(*km, *units),
            TopologyConfig::Custom { nodes, links } => TopologySpec {
                nodes: nodes.clone(),
                links: links.clone(),
                physics: PhysicsConfig::default(),
            },
        };
        t.physics = self.physics.clone();
        t
    }

    /// The seed to use: an explicit override, else the config's own.
    pub fn resolve_seed(&self, explicit: Option<u64>) -> Result<u64, NetError> {
        explicit.or(self.seed).ok_or_else(|| NetError::Config {
            path: "seed".into(),
            msg: "no seed given on the command line or in the config".into(),
        })
    }
}
