//! Transmitter and channel model: constellations, pulse shaping, and the
//! AWGN / laser phase noise / chromatic dispersion impairments.

use std::cell::RefCell;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{MfiError, Result};
use crate::seed::derive_seed;

/// 28 Gbaud.
pub const DEFAULT_SYMBOL_RATE: f64 = 28e9;
/// OSNR reference noise bandwidth (0.1 nm at 1550 nm).
pub const OSNR_REF_BANDWIDTH: f64 = 12.5e9;
pub const CARRIER_WAVELENGTH: f64 = 1550e-9;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModFormat {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8PSK")]
    Psk8,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "32QAM")]
    Qam32,
    #[serde(rename = "64QAM")]
    Qam64,
}

impl ModFormat {
    pub const ALL: [ModFormat; 5] = [
        ModFormat::Qpsk,
        ModFormat::Psk8,
        ModFormat::Qam16,
        ModFormat::Qam32,
        ModFormat::Qam64,
    ];

    pub fn cardinality(self) -> usize {
        match self {
            ModFormat::Qpsk => 4,
            ModFormat::Psk8 => 8,
            ModFormat::Qam16 => 16,
            ModFormat::Qam32 => 32,
            ModFormat::Qam64 => 64,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModFormat::Qpsk => "QPSK",
            ModFormat::Psk8 => "8PSK",
            ModFormat::Qam16 => "16QAM",
            ModFormat::Qam32 => "32QAM",
            ModFormat::Qam64 => "64QAM",
        }
    }

    /// Stable index used for seed derivation and row ordering.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ModFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModFormat {
    type Err = MfiError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', '_'], "");
        match norm.as_str() {
            "QPSK" | "4QAM" => Ok(ModFormat::Qpsk),
            "8PSK" | "PSK8" => Ok(ModFormat::Psk8),
            "16QAM" | "QAM16" => Ok(ModFormat::Qam16),
            "32QAM" | "QAM32" => Ok(ModFormat::Qam32),
            "64QAM" | "QAM64" => Ok(ModFormat::Qam64),
            _ => Err(MfiError::InvalidParameter(format!(
                "unknown modulation format '{s}'"
            ))),
        }
    }
}

/// A complex baseband sample sequence for one polarization tributary.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFrame {
    samples: Vec<Complex64>,
    symbol_rate: f64,
    samples_per_symbol: usize,
}

impl SampleFrame {
    pub fn new(
        samples: Vec<Complex64>,
        symbol_rate: f64,
        samples_per_symbol: usize,
    ) -> Result<Self> {
        if samples_per_symbol == 0 {
            return Err(MfiError::InvalidParameter(
                "samples_per_symbol must be positive".into(),
            ));
        }
        if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
            return Err(MfiError::InvalidParameter(format!(
                "symbol rate {symbol_rate} must be positive"
            )));
        }
        if samples.len() % samples_per_symbol != 0 {
            return Err(MfiError::InvalidParameter(format!(
                "{} samples is not a multiple of {} samples/symbol",
                samples.len(),
                samples_per_symbol
            )));
        }
        Ok(Self {
            samples,
            symbol_rate,
            samples_per_symbol,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn symbol_rate(&self) -> f64 {
        self.symbol_rate
    }

    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.samples_per_symbol as f64
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn symbol_count(&self) -> usize {
        self.samples.len() / self.samples_per_symbol
    }

    /// Mean squared magnitude of the samples.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        Self {
            samples,
            symbol_rate: self.symbol_rate,
            samples_per_symbol: self.samples_per_symbol,
        }
    }
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Channel impairments applied by [`simulate_link`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentSpec {
    /// OSNR in dB over a 12.5 GHz reference bandwidth. `f64::INFINITY` disables noise.
    pub osnr_db: f64,
    /// Combined transmitter + local-oscillator linewidth in Hz.
    pub linewidth_hz: f64,
    /// Accumulated dispersion applied by the fiber, in ps/nm.
    pub applied_cd_ps_nm: f64,
    pub seed: u64,
}

impl ImpairmentSpec {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            osnr_db: f64::INFINITY,
            linewidth_hz: 0.0,
            applied_cd_ps_nm: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.osnr_db.is_nan() || self.osnr_db == f64::NEG_INFINITY {
            return Err(MfiError::InvalidParameter(format!(
                "OSNR {} dB is not usable",
                self.osnr_db
            )));
        }
        if !(self.linewidth_hz >= 0.0 && self.linewidth_hz.is_finite()) {
            return Err(MfiError::InvalidParameter(format!(
                "linewidth {} Hz must be >= 0",
                self.linewidth_hz
            )));
        }
        if !self.applied_cd_ps_nm.is_finite() {
            return Err(MfiError::InvalidParameter(
                "dispersion must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Transmitter sampling and pulse-shaping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    pub rolloff: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            symbol_rate: DEFAULT_SYMBOL_RATE,
            samples_per_symbol: 2,
            rolloff: 0.1,
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward FFT plan of length `len`, cached per thread.
pub(crate) fn fft_forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// Inverse (unnormalized) FFT plan of length `len`, cached per thread.
pub(crate) fn fft_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Ideal constellation of `format`, scaled to unit mean symbol energy.
pub fn constellation_points(format: ModFormat) -> Vec<Complex64> {
    let raw: Vec<Complex64> = match format {
        ModFormat::Qpsk => {
            return [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
                .iter()
                .map(|&(re, im)| Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2))
                .collect();
        }
        ModFormat::Psk8 => {
            return (0..8)
                .map(|k| Complex64::from_polar(1.0, k as f64 * PI / 4.0))
                .collect();
        }
        ModFormat::Qam16 => square_grid(4),
        ModFormat::Qam64 => square_grid(8),
        // 6x6 grid without its four corners.
        ModFormat::Qam32 => square_grid(6)
            .into_iter()
            .filter(|p| !(p.re.abs() == 5.0 && p.im.abs() == 5.0))
            .collect(),
    };
    let scale = mean_power(&raw).sqrt().recip();
    raw.into_iter().map(|p| p * scale).collect()
}

fn square_grid(side: usize) -> Vec<Complex64> {
    let levels: Vec<f64> = (0..side)
        .map(|i| 2.0 * i as f64 - (side as f64 - 1.0))
        .collect();
    levels
        .iter()
        .flat_map(|&im| levels.iter().map(move |&re| Complex64::new(re, im)))
        .collect()
}

/// Draws `n` i.i.d. uniform symbols from the constellation of `format`.
pub fn generate_symbols(format: ModFormat, n: usize, seed: u64) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(MfiError::EmptyInput("symbol count must be at least 1"));
    }
    let points = constellation_points(format);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| points[rng.random_range(0..points.len())])
        .collect())
}

/// Raised-cosine spectrum at frequency `nu` normalized to the symbol rate.
pub(crate) fn raised_cosine(nu: f64, rolloff: f64) -> f64 {
    let a = nu.abs();
    let lo = 0.5 * (1.0 - rolloff);
    let hi = 0.5 * (1.0 + rolloff);
    if rolloff == 0.0 {
        return if a < 0.5 {
            1.0
        } else if a == 0.5 {
            0.5
        } else {
            0.0
        };
    }
    if a <= lo {
        1.0
    } else if a <= hi {
        0.5 * (1.0 + (PI / rolloff * (a - lo)).cos())
    } else {
        0.0
    }
}

/// DFT bin `k` of an `len`-point transform as a signed bin offset.
pub(crate) fn signed_bin(k: usize, len: usize) -> f64 {
    if k < len.div_ceil(2) {
        k as f64
    } else {
        k as f64 - len as f64
    }
}

pub(crate) fn check_rolloff(rolloff: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rolloff) {
        Ok(())
    } else {
        Err(MfiError::InvalidRolloff(rolloff))
    }
}

/// Root-raised-cosine pulse shaping, performed circularly over the whole frame
/// in the frequency domain.
///
/// The transmit filter is scaled so a unit-energy symbol stream yields unit
/// mean sample power, and a unit-gain root-raised-cosine matched filter
/// followed by decimation returns the symbols exactly.
pub fn upsample_shape(
    symbols: &[Complex64],
    samples_per_symbol: usize,
    rolloff: f64,
    symbol_rate: f64,
) -> Result<SampleFrame> {
    check_rolloff(rolloff)?;
    if symbols.is_empty() {
        return Err(MfiError::EmptyInput("no symbols to shape"));
    }
    if samples_per_symbol == 0 {
        return Err(MfiError::InvalidParameter(
            "samples_per_symbol must be positive".into(),
        ));
    }
    if samples_per_symbol == 1 {
        return SampleFrame::new(symbols.to_vec(), symbol_rate, 1);
    }
    let n = symbols.len();
    let total = n * samples_per_symbol;

    let mut spectrum = symbols.to_vec();
    fft_forward(n).process(&mut spectrum);

    let gain = samples_per_symbol as f64;
    let mut shaped: Vec<Complex64> = (0..total)
        .map(|k| {
            let nu = signed_bin(k, total) / n as f64;
            spectrum[k % n] * (gain * raised_cosine(nu, rolloff).sqrt())
        })
        .collect();
    fft_inverse(total).process(&mut shaped);
    let norm = (total as f64).recip();
    shaped.iter_mut().for_each(|s| *s *= norm);
    SampleFrame::new(shaped, symbol_rate, samples_per_symbol)
}

/// Adds circular complex white Gaussian noise for the requested OSNR.
///
/// The OSNR maps to the symbol-rate SNR through
/// `SNR = OSNR * B_ref / R_s`. Noise is white over the full sampling bandwidth,
/// with density chosen so the power falling inside the symbol-rate bandwidth is
/// `P_sig / SNR`. A matched-filtered symbol stream therefore sees exactly
/// that SNR.
pub fn apply_awgn(frame: &SampleFrame, osnr_db: f64, seed: u64) -> Result<SampleFrame> {
    if frame.is_empty() {
        return Err(MfiError::EmptyInput("frame has no samples"));
    }
    if osnr_db == f64::INFINITY {
        return Ok(frame.clone());
    }
    if !osnr_db.is_finite() {
        return Err(MfiError::InvalidParameter(format!(
            "OSNR {osnr_db} dB is not usable"
        )));
    }
    let variance = awgn_sample_variance(
        frame.power(),
        osnr_db,
        frame.symbol_rate(),
        frame.samples_per_symbol(),
    );
    let sigma = (variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = frame
        .samples()
        .iter()
        .map(|&s| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            s + Complex64::new(re * sigma, im * sigma)
        })
        .collect();
    Ok(frame.with_samples(noisy))
}

/// Symbol-rate SNR (linear) corresponding to `osnr_db`.
pub fn osnr_to_snr(osnr_db: f64, symbol_rate: f64) -> f64 {
    10f64.powf(osnr_db / 10.0) * OSNR_REF_BANDWIDTH / symbol_rate
}

/// Per-sample complex noise variance added by [`apply_awgn`].
pub fn awgn_sample_variance(
    signal_power: f64,
    osnr_db: f64,
    symbol_rate: f64,
    samples_per_symbol: usize,
) -> f64 {
    samples_per_symbol as f64 * signal_power / osnr_to_snr(osnr_db, symbol_rate)
}

/// Rotates every sample by a Wiener phase process with per-sample increment
/// variance `2π · linewidth · T_sample`.
pub fn apply_phase_noise(frame: &SampleFrame, linewidth_hz: f64, seed: u64) -> Result<SampleFrame> {
    if !(linewidth_hz >= 0.0 && linewidth_hz.is_finite()) {
        return Err(MfiError::InvalidParameter(format!(
            "linewidth {linewidth_hz} Hz must be >= 0"
        )));
    }
    if linewidth_hz == 0.0 {
        return Ok(frame.clone());
    }
    let step = (2.0 * PI * linewidth_hz / frame.sample_rate()).sqrt();
    let normal = Normal::new(0.0, step).expect("finite step");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = 0.0f64;
    let rotated = frame
        .samples()
        .iter()
        .map(|&s| {
            theta += normal.sample(&mut rng);
            s * Complex64::from_polar(1.0, theta)
        })
        .collect();
    Ok(frame.with_samples(rotated))
}

/// Spread of the dispersive impulse response in samples.
pub fn cd_spread_samples(cd_ps_nm: f64, sample_rate: f64) -> f64 {
    // ps/nm -> s/m
    let d = cd_ps_nm * 1e-3;
    (d * CARRIER_WAVELENGTH * CARRIER_WAVELENGTH / SPEED_OF_LIGHT * sample_rate * sample_rate).abs()
}

/// Chromatic dispersion as a full-frame all-pass filter
/// `H(f) = exp(-j π λ² D f² / c)` with `D` in ps/nm.
pub fn apply_cd(frame: &SampleFrame, cd_ps_nm: f64) -> Result<SampleFrame> {
    if !cd_ps_nm.is_finite() {
        return Err(MfiError::InvalidParameter(
            "dispersion must be finite".into(),
        ));
    }
    if cd_ps_nm == 0.0 {
        return Ok(frame.clone());
    }
    if frame.samples_per_symbol() < 2 {
        return Err(MfiError::InvalidParameter(
            "chromatic dispersion needs at least 2 samples per symbol".into(),
        ));
    }
    let len = frame.len();
    let spread = cd_spread_samples(cd_ps_nm, frame.sample_rate()).ceil() as usize;
    if spread >= len {
        return Err(MfiError::FrameTooShort {
            frame_len: len,
            spread,
        });
    }
    let beta = PI * CARRIER_WAVELENGTH * CARRIER_WAVELENGTH * (cd_ps_nm * 1e-3) / SPEED_OF_LIGHT;
    let df = frame.sample_rate() / len as f64;

    let mut buf = frame.samples().to_vec();
    fft_forward(len).process(&mut buf);
    let norm = (len as f64).recip();
    for (k, x) in buf.iter_mut().enumerate() {
        let f = signed_bin(k, len) * df;
        *x *= Complex64::from_polar(norm, -beta * f * f);
    }
    fft_inverse(len).process(&mut buf);
    Ok(frame.with_samples(buf))
}

/// Transmitter and channel: generate, shape, disperse, rotate, add noise.
pub fn simulate_link(
    format: ModFormat,
    n_symbols: usize,
    spec: &ImpairmentSpec,
) -> Result<SampleFrame> {
    simulate_link_with(format, n_symbols, spec, &LinkConfig::default())
}

pub fn simulate_link_with(
    format: ModFormat,
    n_symbols: usize,
    spec: &ImpairmentSpec,
    link: &LinkConfig,
) -> Result<SampleFrame> {
    spec.validate()?;
    let symbols = generate_symbols(format, n_symbols, derive_seed(spec.seed, &[0]))?;
    let frame = upsample_shape(
        &symbols,
        link.samples_per_symbol,
        link.rolloff,
        link.symbol_rate,
    )?;
    let frame = apply_cd(&frame, spec.applied_cd_ps_nm)?;
    let frame = apply_phase_noise(&frame, spec.linewidth_hz, derive_seed(spec.seed, &[1]))?;
    apply_awgn(&frame, spec.osnr_db, derive_seed(spec.seed, &[2]))
}

/// The transmitted symbols used by [`simulate_link`] for a given seed.
pub fn link_symbols(
    format: ModFormat,
    n_symbols: usize,
    spec: &ImpairmentSpec,
) -> Result<Vec<Complex64>> {
    generate_symbols(format, n_symbols, derive_seed(spec.seed, &[0]))
}
