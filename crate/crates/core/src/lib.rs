//! Coherent-optical link simulation and clustering-based modulation format
//! identification (MFI).
//!
//! The identification pipeline works on symbol-rate samples of one
//! polarization tributary:
//!
//! 1. power normalization and 4QAM blind phase search ([`frontend`]),
//! 2. an 80x80 constellation histogram whose 640 tallest bins become the
//!    key blocks ([`histokey`]),
//! 3. nearest-prototype k-partitions of the key blocks for k = 2..=m, each
//!    scored by the mean Silhouette; the best k* is looked up in a
//!    [`DecisionTable`] ([`cluster`], [`decision`]).
//!
//! [`signal`] provides the transmitter and channel used to exercise the
//! pipeline, and [`dbscan`] a density-clustering baseline for runtime
//! comparisons.

pub mod cluster;
pub mod dbscan;
pub mod decision;
pub mod error;
pub mod frontend;
pub mod histokey;
pub mod mfi;
pub mod seed;
pub mod signal;

pub use cluster::{
    best_k, partition_k, silhouette_f, KsweepResult, Partition, PartitionConfig, SilhouetteMode,
    SweepConfig,
};
pub use dbscan::{dbscan, dbscan_mfi, DbscanCalibration, DbscanDecision, DbscanParams};
pub use decision::{decide_format, Decision, DecisionRule, DecisionTable};
pub use error::{MfiError, Result};
pub use frontend::{bps_4qam, compensate_cd, to_symbol_rate, BpsConfig};
pub use histokey::{build_histogram, select_key_blocks, Histogram2D, KeyBlockSet};
pub use mfi::{identify, MfiConfig, MfiDecision};
pub use num_complex::Complex64;
pub use seed::derive_seed;
pub use signal::{
    apply_awgn, apply_cd, apply_phase_noise, constellation_points, generate_symbols, simulate_link,
    upsample_shape, ImpairmentSpec, LinkConfig, ModFormat, SampleFrame,
};
