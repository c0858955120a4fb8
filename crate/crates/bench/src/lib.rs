//! Shared fixtures for the benchmarks.

use mfi_core::{simulate_link, to_symbol_rate, Complex64, ImpairmentSpec, ModFormat};

/// Matched-filtered symbols of one simulated frame without dispersion.
pub fn received(format: ModFormat, n_symbols: usize, osnr_db: f64, seed: u64) -> Vec<Complex64> {
    let spec = ImpairmentSpec {
        osnr_db,
        linewidth_hz: 200e3,
        applied_cd_ps_nm: 0.0,
        seed,
    };
    let frame = simulate_link(format, n_symbols, &spec).expect("valid link parameters");
    to_symbol_rate(&frame, 0.1, 0).expect("valid frame")
}

/// OSNR at which each format is identified reliably.
pub fn operating_osnr(format: ModFormat) -> f64 {
    match format {
        ModFormat::Qpsk => 13.0,
        ModFormat::Psk8 => 16.0,
        ModFormat::Qam16 => 19.0,
        ModFormat::Qam32 => 22.0,
        ModFormat::Qam64 => 25.0,
    }
}
