//! The end-to-end identification pipeline on symbol-rate samples.

use num_complex::Complex64;
use serde::Serialize;

use crate::cluster::{best_k, KsweepResult, SweepConfig};
use crate::decision::{Decision, DecisionTable};
use crate::error::{MfiError, Result};
use crate::frontend::{bps_4qam, normalize_power, BpsConfig};
use crate::histokey::{
    build_histogram, select_key_blocks, KeyBlockSet, DEFAULT_EXTENT, DEFAULT_GRID_SIZE,
    DEFAULT_KEY_BLOCKS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MfiConfig {
    pub bps: BpsConfig,
    pub grid_size: usize,
    /// Histogram half-width on unit-power symbols.
    pub extent: f64,
    pub key_blocks: usize,
    pub sweep: SweepConfig,
    pub table: DecisionTable,
    pub seed: u64,
}

impl Default for MfiConfig {
    fn default() -> Self {
        Self {
            bps: BpsConfig::default(),
            grid_size: DEFAULT_GRID_SIZE,
            extent: DEFAULT_EXTENT,
            key_blocks: DEFAULT_KEY_BLOCKS,
            sweep: SweepConfig::default(),
            table: DecisionTable::default(),
            seed: 0,
        }
    }
}

impl MfiConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MfiDecision {
    pub format: Decision,
    pub k_star: usize,
    /// `None` when fewer than two key blocks exist and no sweep ran.
    pub f_max: Option<f64>,
    #[serde(skip)]
    pub sweep: Option<KsweepResult>,
    #[serde(skip)]
    pub key_blocks: KeyBlockSet,
}

/// Power normalization and 4QAM blind phase search.
pub fn phase_process(symbols: &[Complex64], bps: &BpsConfig) -> Result<Vec<Complex64>> {
    if symbols.is_empty() {
        return Err(MfiError::EmptyInput("no symbols to identify"));
    }
    bps_4qam(&normalize_power(symbols), bps)
}

/// Stage one: phase processing, histogram, key blocks.
pub fn extract_key_blocks(symbols: &[Complex64], cfg: &MfiConfig) -> Result<KeyBlockSet> {
    let processed = phase_process(symbols, &cfg.bps)?;
    let hist = build_histogram(&processed, cfg.grid_size, cfg.extent)?;
    select_key_blocks(&hist, cfg.key_blocks)
}

/// Stage two: k-sweep over the key blocks and the table lookup.
///
/// A single key block (e.g. an all-zero input) gives k* = 1 without a sweep.
pub fn classify_key_blocks(key_blocks: KeyBlockSet, cfg: &MfiConfig) -> Result<MfiDecision> {
    if key_blocks.len() < 2 {
        return Ok(MfiDecision {
            format: cfg.table.decide(key_blocks.len()),
            k_star: key_blocks.len(),
            f_max: None,
            sweep: None,
            key_blocks,
        });
    }
    let sweep = best_k(&key_blocks, cfg.seed, &cfg.sweep)?;
    Ok(MfiDecision {
        format: cfg.table.decide(sweep.k_star),
        k_star: sweep.k_star,
        f_max: Some(sweep.f_max()),
        sweep: Some(sweep),
        key_blocks,
    })
}

/// Full identification on symbol-rate samples.
pub fn identify(symbols: &[Complex64], cfg: &MfiConfig) -> Result<MfiDecision> {
    let key_blocks = extract_key_blocks(symbols, cfg)?;
    classify_key_blocks(key_blocks, cfg)
}
