//! Run configuration: one TOML document with sections for the plant,
//! the learner, the randomized-domain ranges, controller weights, reward
//! weights, observation scales, evaluation options, and the seed list.
//! Every field has a default, so a config file only needs the overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ddpg::DdpgHyper;
use crate::error::{Error, Result};
use crate::lmdp::{
    DomainDistribution, EnvConfig, ObservationScales, RewardWeights, TrainSetup,
};
use crate::mbc::{NominalModel, SynthesisSpec};
use crate::numerics::Matrix;
use crate::plant::{PlantParams, ReferenceProfile};

/// Training-run shape plus the gradient-update hyperparameters, kept in a
/// single `[ddpg]` table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgSection {
    pub episodes: usize,
    pub hidden: usize,
    pub buffer_capacity: usize,
    #[serde(flatten)]
    pub hyper: DdpgHyper,
}

impl Default for DdpgSection {
    fn default() -> Self {
        DdpgSection {
            episodes: 300,
            hidden: 64,
            buffer_capacity: 100_000,
            hyper: DdpgHyper::default(),
        }
    }
}

/// Scalar controller-synthesis knobs; the matrix-valued weights are built
/// from these and the nominal model.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MbcSection {
    pub input_weight: f64,
    pub integral_weight: f64,
}

impl Default for MbcSection {
    fn default() -> Self {
        MbcSection {
            input_weight: 3e-4,
            integral_weight: 100.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// Multiplies every reported error 2-norm; maps meters to table units.
    pub norm_scale: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { norm_scale: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub plant: PlantParams,
    pub reference: ReferenceProfile,
    pub env: EnvConfig,
    pub ddpg: DdpgSection,
    pub domain: DomainDistribution,
    pub mbc: MbcSection,
    pub reward: RewardWeights,
    pub scales: ObservationScales,
    pub eval: EvalSection,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            plant: PlantParams::default(),
            reference: ReferenceProfile::default(),
            env: EnvConfig::default(),
            ddpg: DdpgSection::default(),
            domain: DomainDistribution::default(),
            mbc: MbcSection::default(),
            reward: RewardWeights::default(),
            scales: ObservationScales::default(),
            eval: EvalSection::default(),
            seeds: vec![1, 2, 3],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_toml()?)?;
        Ok(())
    }

    /// Controller-synthesis weights for the given nominal model.
    pub fn synthesis_spec(&self, nominal: &NominalModel) -> SynthesisSpec {
        let mut spec = SynthesisSpec::default_for(nominal);
        spec.input_weight = Matrix::scalar(self.mbc.input_weight);
        spec.integral_weight = self.mbc.integral_weight;
        spec
    }

    /// Training setup for one seed; scenario comes from the domain table.
    pub fn train_setup(&self, seed: u64) -> TrainSetup {
        TrainSetup {
            scenario: self.domain.scenario,
            only_dr: false,
            mlp: false,
            episodes: self.ddpg.episodes,
            hidden: self.ddpg.hidden,
            hyper: self.ddpg.hyper,
            env: self.env,
            domain: self.domain,
            weights: self.reward,
            scales: self.scales,
            buffer_capacity: self.ddpg.buffer_capacity,
            seed,
        }
    }
}
