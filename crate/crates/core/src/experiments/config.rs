//! Versioned run configuration shared by the CLI and the studies.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::extract::SaturationThresholds;
use crate::cascade::training::NetConfig;
use crate::error::{Error, Result};
use crate::experiments::convergence::ConvergenceConfig;
use crate::sampling::dataset::SamplingOptions;
use crate::stage::Stage;

pub const RUN_CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfigs {
    pub cgg_forward: NetConfig,
    pub cgg_inverse: NetConfig,
    pub id_forward: NetConfig,
    pub id_inverse: NetConfig,
}

impl NetConfigs {
    pub fn forward(&self, stage: Stage) -> &NetConfig {
        match stage {
            Stage::Cgg => &self.cgg_forward,
            Stage::Id => &self.id_forward,
        }
    }

    pub fn inverse(&self, stage: Stage) -> &NetConfig {
        match stage {
            Stage::Cgg => &self.cgg_inverse,
            Stage::Id => &self.id_inverse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSizes {
    pub cgg: usize,
    pub id: usize,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        Self {
            cgg: 50_000,
            id: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub stages: Vec<Stage>,
    pub sample_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub validation_size: usize,
    pub data_seed: u64,
    pub net: NetConfig,
    pub target_mse: Option<f64>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            stages: Stage::ALL.to_vec(),
            sample_counts: vec![1000, 2000, 4000, 8000, 16000, 32000, 64000],
            seeds: vec![1, 2, 3],
            validation_size: 2000,
            data_seed: 0,
            net: NetConfig::default(),
            target_mse: None,
        }
    }
}

impl ConvergenceSection {
    pub fn for_stage(&self, stage: Stage, sampling: SamplingOptions) -> ConvergenceConfig {
        ConvergenceConfig {
            stage,
            sample_counts: self.sample_counts.clone(),
            seeds: self.seeds.clone(),
            validation_size: self.validation_size,
            data_seed: self.data_seed,
            sampling,
            net: self.net.clone(),
            target_mse: self.target_mse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiRangeSection {
    /// Seed of the synthetic device under study.
    pub device_seed: u64,
    /// Work function of that device, in eV.
    pub device_phig: f64,
    pub n_feasible: usize,
    pub constraint_seed: u64,
    pub infeasible_phig: [f64; 2],
}

impl Default for MultiRangeSection {
    fn default() -> Self {
        Self {
            device_seed: 0,
            device_phig: 4.4,
            n_feasible: 2,
            constraint_seed: 0,
            infeasible_phig: [4.7, 4.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampling: SamplingOptions,
    #[serde(default)]
    pub datasets: DatasetSizes,
    #[serde(default)]
    pub nets: NetConfigs,
    #[serde(default)]
    pub saturation: SaturationThresholds,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub multirange: MultiRangeSection,
    /// Model directory for studies that extract.
    #[serde(default)]
    pub models: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: RUN_CONFIG_VERSION,
            seed: 0,
            sampling: SamplingOptions::default(),
            datasets: DatasetSizes::default(),
            nets: NetConfigs::default(),
            saturation: SaturationThresholds::default(),
            convergence: ConvergenceSection::default(),
            multirange: MultiRangeSection::default(),
            models: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != RUN_CONFIG_VERSION {
            return Err(Error::Version {
                found: self.schema_version,
                expected: RUN_CONFIG_VERSION,
            });
        }
        self.saturation.validate()?;
        for n in [
            &self.nets.cgg_forward,
            &self.nets.cgg_inverse,
            &self.nets.id_forward,
            &self.nets.id_inverse,
        ] {
            n.train.validate()?;
            if !(0.0..=1.0).contains(&n.infeasible_windows) {
                return Err(Error::invalid("infeasible_windows must lie in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.sampling.p_fixed) {
            return Err(Error::invalid("p_fixed must lie in [0, 1]"));
        }
        Ok(())
    }
}
