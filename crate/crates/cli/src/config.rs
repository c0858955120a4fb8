//! Experiment configuration, loaded from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mfi_core::dbscan::DbscanCalibration;
use mfi_core::{
    BpsConfig, DecisionTable, MfiConfig, ModFormat, PartitionConfig, SilhouetteMode, SweepConfig,
};
use serde::{Deserialize, Serialize};

/// Knobs of the identification pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub bps: BpsConfig,
    pub grid_size: usize,
    pub extent: f64,
    pub key_blocks: usize,
    /// Largest k in the sweep.
    pub m: usize,
    pub n_init: usize,
    pub max_iter: usize,
    /// Weight centroid updates by key-bin height.
    pub weighted: bool,
    pub silhouette: SilhouetteMode,
    /// Decision table file; the shipped table when absent.
    pub decision_table: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mfi = MfiConfig::default();
        Self {
            bps: mfi.bps,
            grid_size: mfi.grid_size,
            extent: mfi.extent,
            key_blocks: mfi.key_blocks,
            m: mfi.sweep.m,
            n_init: mfi.sweep.partition.n_init,
            max_iter: mfi.sweep.partition.max_iter,
            weighted: mfi.sweep.partition.weighted,
            silhouette: mfi.sweep.silhouette,
            decision_table: None,
        }
    }
}

impl PipelineConfig {
    /// Resolves the decision table and builds the core configuration.
    pub fn to_mfi(&self) -> Result<MfiConfig> {
        let table = match &self.decision_table {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading decision table {}", path.display()))?;
                DecisionTable::from_toml_str(&text)?
            }
            None => DecisionTable::default(),
        };
        Ok(MfiConfig {
            bps: self.bps,
            grid_size: self.grid_size,
            extent: self.extent,
            key_blocks: self.key_blocks,
            sweep: SweepConfig {
                m: self.m,
                partition: PartitionConfig {
                    n_init: self.n_init,
                    max_iter: self.max_iter,
                    weighted: self.weighted,
                },
                silhouette: self.silhouette,
            },
            table,
            seed: 0,
        })
    }
}

/// Settings for the runtime comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexityConfig {
    /// Frames timed per format.
    pub trials: usize,
    /// Timed repetitions per frame; the median is kept.
    pub reps: usize,
    /// Untimed runs before the first repetition.
    pub warmup: usize,
    /// Symbol counts for the stage-two scaling table.
    pub scaling_sizes: Vec<usize>,
    /// Per-format DBSCAN parameters; the shipped calibration when absent.
    pub dbscan_params: Option<PathBuf>,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            reps: 5,
            warmup: 1,
            scaling_sizes: vec![10_000, 100_000],
            dbscan_params: None,
        }
    }
}

impl ComplexityConfig {
    pub fn calibration(&self) -> Result<DbscanCalibration> {
        match &self.dbscan_params {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading DBSCAN parameters {}", path.display()))?;
                Ok(DbscanCalibration::from_toml_str(&text)?)
            }
            None => Ok(DbscanCalibration::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub formats: Vec<ModFormat>,
    pub osnr_grid_db: Vec<f64>,
    /// Residual dispersion grid for the tolerance sweep, ps/nm.
    pub cd_grid_ps_nm: Vec<f64>,
    /// OSNR at which each format is probed in the dispersion and runtime experiments.
    pub operating_osnr_db: BTreeMap<ModFormat, f64>,
    pub trials: usize,
    pub n_symbols: usize,
    pub seed: u64,
    pub linewidth_hz: f64,
    /// Dispersion the fiber accumulates before the receiver compensates it, ps/nm.
    pub line_cd_ps_nm: f64,
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    pub rolloff: f64,
    pub pipeline: PipelineConfig,
    pub complexity: ComplexityConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            formats: ModFormat::ALL.to_vec(),
            osnr_grid_db: (4..=30).map(f64::from).collect(),
            cd_grid_ps_nm: (-20..=20).map(|i| f64::from(i) * 50.0).collect(),
            operating_osnr_db: ModFormat::ALL
                .into_iter()
                .zip([13.0, 16.0, 19.0, 22.0, 25.0])
                .collect(),
            trials: 100,
            n_symbols: 1 << 16,
            seed: 1,
            linewidth_hz: 200e3,
            line_cd_ps_nm: 1000.0,
            symbol_rate: mfi_core::signal::DEFAULT_SYMBOL_RATE,
            samples_per_symbol: 2,
            rolloff: 0.1,
            pipeline: PipelineConfig::default(),
            complexity: ComplexityConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            bail!("trials must be at least 1");
        }
        if self.formats.is_empty() {
            bail!("formats must not be empty");
        }
        if self.osnr_grid_db.is_empty() {
            bail!("osnr_grid_db must not be empty");
        }
        if self.cd_grid_ps_nm.is_empty() {
            bail!("cd_grid_ps_nm must not be empty");
        }
        if self.n_symbols < 1 {
            bail!("n_symbols must be at least 1");
        }
        if self
            .osnr_grid_db
            .iter()
            .chain(&self.cd_grid_ps_nm)
            .any(|v| !v.is_finite())
        {
            bail!("grid values must be finite");
        }
        if self.samples_per_symbol < 2 {
            bail!("samples_per_symbol must be at least 2 for dispersion");
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            bail!("rolloff {} outside [0, 1]", self.rolloff);
        }
        if self.linewidth_hz.is_nan() || self.linewidth_hz < 0.0 {
            bail!("linewidth_hz must be non-negative");
        }
        for f in &self.formats {
            if !self.operating_osnr_db.contains_key(f) {
                bail!("no operating OSNR for {f}");
            }
        }
        let c = &self.complexity;
        if c.trials < 1 || c.reps < 1 {
            bail!("complexity trials and reps must be at least 1");
        }
        self.pipeline.bps.validate()?;
        if self.pipeline.m < 2 {
            bail!("sweep limit m must be at least 2");
        }
        if self.pipeline.key_blocks < 1 || self.pipeline.grid_size < 1 || self.pipeline.n_init < 1 {
            bail!("key_blocks, grid_size and n_init must be positive");
        }
        if !(self.pipeline.extent > 0.0 && self.pipeline.extent.is_finite()) {
            bail!("extent must be positive");
        }
        Ok(())
    }

    pub fn operating_osnr(&self, format: ModFormat) -> f64 {
        self.operating_osnr_db[&format]
    }
}
