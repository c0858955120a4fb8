//! Receiver front end: dispersion compensation, matched filtering, and
//! modulation-independent carrier phase recovery by 4QAM blind phase search.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MfiError, Result};
use crate::signal::{
    apply_cd, check_rolloff, fft_forward, fft_inverse, mean_power, raised_cosine, signed_bin,
    SampleFrame,
};

/// Removes `cd_ps_nm` of accumulated dispersion (the exact inverse of
/// [`apply_cd`]).
pub fn compensate_cd(frame: &SampleFrame, cd_ps_nm: f64) -> Result<SampleFrame> {
    apply_cd(frame, -cd_ps_nm)
}

/// Root-raised-cosine matched filter followed by decimation to one sample per
/// symbol. `trim` symbols are dropped from each end of the output.
pub fn to_symbol_rate(frame: &SampleFrame, rolloff: f64, trim: usize) -> Result<Vec<Complex64>> {
    check_rolloff(rolloff)?;
    let n = frame.symbol_count();
    if n == 0 || n <= 2 * trim {
        return Err(MfiError::FilterSpan {
            samples: frame.len(),
            required: 2 * trim * frame.samples_per_symbol(),
        });
    }
    let sps = frame.samples_per_symbol();
    let symbols = if sps == 1 {
        frame.samples().to_vec()
    } else {
        let total = frame.len();
        let mut spectrum = frame.samples().to_vec();
        fft_forward(total).process(&mut spectrum);

        // Filter, then fold the sps spectral images onto the symbol-rate band.
        let mut folded = vec![Complex64::new(0.0, 0.0); n];
        for (k, x) in spectrum.iter().enumerate() {
            let nu = signed_bin(k, total) / n as f64;
            let h = raised_cosine(nu, rolloff);
            if h > 0.0 {
                folded[k % n] += x * h.sqrt();
            }
        }
        fft_inverse(n).process(&mut folded);
        let norm = (total as f64).recip();
        folded.iter_mut().for_each(|s| *s *= norm);
        folded
    };
    Ok(symbols[trim..n - trim].to_vec())
}

/// Scales `symbols` to unit mean power. All-zero input is returned unchanged.
pub fn normalize_power(symbols: &[Complex64]) -> Vec<Complex64> {
    let p = mean_power(symbols);
    if p > 0.0 && p.is_finite() {
        let g = p.sqrt().recip();
        symbols.iter().map(|s| s * g).collect()
    } else {
        symbols.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpsConfig {
    /// Test phases spread uniformly over [0, π/2).
    pub num_test_phases: usize,
    /// Symbols on each side of the symbol being corrected.
    pub window_half: usize,
}

impl Default for BpsConfig {
    fn default() -> Self {
        Self {
            num_test_phases: 32,
            window_half: 32,
        }
    }
}

impl BpsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_test_phases < 2 {
            return Err(MfiError::InvalidParameter(
                "BPS needs at least 2 test phases".into(),
            ));
        }
        if self.window_half < 1 {
            return Err(MfiError::InvalidParameter(
                "BPS window_half must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Squared distance from `z` to the nearest unit-energy QPSK point.
#[inline]
fn qpsk_distance(z: Complex64) -> f64 {
    let dr = z.re.abs() - FRAC_1_SQRT_2;
    let di = z.im.abs() - FRAC_1_SQRT_2;
    dr * dr + di * di
}

/// Estimated carrier phase per symbol (unwrapped), as applied by [`bps_4qam`].
pub fn bps_phases(symbols: &[Complex64], cfg: &BpsConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if symbols.is_empty() {
        return Err(MfiError::EmptyInput("no symbols for phase search"));
    }
    let n = symbols.len();
    let b = cfg.num_test_phases;
    let w = cfg.window_half;
    let step = FRAC_PI_2 / b as f64;
    let rotors: Vec<Complex64> = (0..b)
        .map(|i| Complex64::from_polar(1.0, i as f64 * step))
        .collect();
    let cost = |i: usize, acc: &mut [f64], sign: f64| {
        for (a, r) in acc.iter_mut().zip(&rotors) {
            *a += sign * qpsk_distance(symbols[i] * r);
        }
    };

    let mut window = vec![0.0; b];
    for i in 0..=w.min(n - 1) {
        cost(i, &mut window, 1.0);
    }
    let mut phases = Vec::with_capacity(n);
    let mut prev: Option<f64> = None;
    for i in 0..n {
        if i > 0 {
            if i + w < n {
                cost(i + w, &mut window, 1.0);
            }
            if i > w {
                cost(i - w - 1, &mut window, -1.0);
            }
        }
        let best = window
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bi, bv), (j, &v)| if v < bv { (j, v) } else { (bi, bv) },
            )
            .0;
        let base = best as f64 * step;
        let phi = match prev {
            None => base,
            Some(p) => base + ((p - base) / FRAC_PI_2).round() * FRAC_PI_2,
        };
        prev = Some(phi);
        phases.push(phi);
    }
    Ok(phases)
}

/// Blind phase search against the QPSK reference constellation regardless of
/// the transmitted format. Input is expected at unit mean power.
///
/// The per-symbol decision is unwrapped across consecutive symbols by picking,
/// among the four π/2-equivalent phases, the one nearest the previous one. The
/// global π/2 ambiguity is left unresolved.
pub fn bps_4qam(symbols: &[Complex64], cfg: &BpsConfig) -> Result<Vec<Complex64>> {
    let phases = bps_phases(symbols, cfg)?;
    Ok(symbols
        .iter()
        .zip(&phases)
        .map(|(s, &phi)| s * Complex64::from_polar(1.0, phi))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{
        apply_awgn, generate_symbols, osnr_to_snr, upsample_shape, ModFormat, DEFAULT_SYMBOL_RATE,
    };
    use std::f64::consts::FRAC_PI_8;

    fn frame(format: ModFormat, n: usize, seed: u64) -> (Vec<Complex64>, SampleFrame) {
        let sy = generate_symbols(format, n, seed).unwrap();
        let f = upsample_shape(&sy, 2, 0.1, DEFAULT_SYMBOL_RATE).unwrap();
        (sy, f)
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Smallest error over the four global π/2 rotations.
    fn err_up_to_quarter_turn(a: &[Complex64], b: &[Complex64]) -> f64 {
        (0..4)
            .map(|m| {
                let r = Complex64::from_polar(1.0, m as f64 * FRAC_PI_2);
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x * r - y).norm())
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn cd_compensation_inverts_and_composes() {
        let (_, x) = frame(ModFormat::Qam16, 8192, 1);
        let round = compensate_cd(&apply_cd(&x, 800.0).unwrap(), 800.0).unwrap();
        assert!(max_err(round.samples(), x.samples()) < 1e-9);
        assert_eq!(compensate_cd(&x, 0.0).unwrap(), x);
        let residual = compensate_cd(&apply_cd(&x, 1000.0).unwrap(), 700.0).unwrap();
        let direct = apply_cd(&x, 300.0).unwrap();
        assert!(max_err(residual.samples(), direct.samples()) < 1e-9);
    }

    #[test]
    fn cd_commutes_with_scaling() {
        let (_, x) = frame(ModFormat::Qpsk, 1024, 2);
        let g = Complex64::new(0.3, -1.7);
        let scaled = SampleFrame::new(
            x.samples().iter().map(|s| s * g).collect(),
            x.symbol_rate(),
            2,
        )
        .unwrap();
        let a = apply_cd(&scaled, 250.0).unwrap();
        let b = apply_cd(&x, 250.0).unwrap();
        let b: Vec<Complex64> = b.samples().iter().map(|s| s * g).collect();
        assert!(max_err(a.samples(), &b) < 1e-9);
    }

    #[test]
    fn trimming_and_span_errors() {
        let (sy, x) = frame(ModFormat::Qpsk, 100, 3);
        let out = to_symbol_rate(&x, 0.1, 5).unwrap();
        assert_eq!(out.len(), 90);
        assert!(max_err(&out, &sy[5..95]) < 1e-6);
        assert!(matches!(
            to_symbol_rate(&x, 0.1, 50),
            Err(MfiError::FilterSpan { .. })
        ));
    }

    #[test]
    fn symbol_snr_matches_osnr_mapping() {
        let (sy, x) = frame(ModFormat::Qam16, 1 << 16, 4);
        let rx = to_symbol_rate(&apply_awgn(&x, 20.0, 5).unwrap(), 0.1, 0).unwrap();
        let noise: f64 = rx
            .iter()
            .zip(&sy)
            .map(|(r, s)| (r - s).norm_sqr())
            .sum::<f64>()
            / sy.len() as f64;
        let measured_db = 10.0 * (mean_power(&sy) / noise).log10();
        let expected_db = 10.0 * osnr_to_snr(20.0, DEFAULT_SYMBOL_RATE).log10();
        assert!(
            (measured_db - expected_db).abs() < 0.2,
            "{measured_db} vs {expected_db}"
        );
    }

    #[test]
    fn normalize_power_to_unit() {
        let x = vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)];
        assert!((mean_power(&normalize_power(&x)) - 1.0).abs() < 1e-15);
        let zeros = vec![Complex64::new(0.0, 0.0); 3];
        assert_eq!(normalize_power(&zeros), zeros);
    }

    #[test]
    fn bps_removes_constant_offset() {
        let sy = generate_symbols(ModFormat::Qpsk, 2000, 6).unwrap();
        let rotated: Vec<Complex64> = sy
            .iter()
            .map(|s| s * Complex64::from_polar(1.0, FRAC_PI_8))
            .collect();
        let out = bps_4qam(&rotated, &BpsConfig::default()).unwrap();
        assert!(err_up_to_quarter_turn(&out, &sy) < 1e-3);

        let same = bps_4qam(&sy, &BpsConfig::default()).unwrap();
        assert!(err_up_to_quarter_turn(&same, &sy) < 1e-12);
    }

    #[test]
    fn bps_phase_constant_without_phase_noise() {
        let rotate = |sy: Vec<Complex64>| -> Vec<Complex64> {
            sy.iter()
                .map(|s| s * Complex64::from_polar(1.0, 0.3))
                .collect()
        };
        let qpsk = rotate(generate_symbols(ModFormat::Qpsk, 5000, 7).unwrap());
        let phases = bps_phases(&qpsk, &BpsConfig::default()).unwrap();
        assert!(phases.iter().all(|&p| p == phases[0]));

        // 16QAM only matches the QPSK reference on average, so the windowed
        // decision dithers by a few test phases, but it never slips by π/2.
        let qam = rotate(generate_symbols(ModFormat::Qam16, 5000, 7).unwrap());
        let phases = bps_phases(&qam, &BpsConfig::default()).unwrap();
        assert!(phases.iter().all(|&p| (p - phases[0]).abs() < FRAC_PI_8));
    }

    #[test]
    fn bps_preserves_magnitudes() {
        let (sy, _) = frame(ModFormat::Qam64, 3000, 8);
        let out = bps_4qam(
            &sy,
            &BpsConfig {
                num_test_phases: 17,
                window_half: 5,
            },
        )
        .unwrap();
        for (a, b) in out.iter().zip(&sy) {
            assert!((a.norm() - b.norm()).abs() <= 4.0 * f64::EPSILON * b.norm());
        }
    }

    #[test]
    fn bps_handles_short_input_and_rejects_bad_config() {
        let sy = generate_symbols(ModFormat::Qpsk, 3, 9).unwrap();
        assert_eq!(bps_4qam(&sy, &BpsConfig::default()).unwrap().len(), 3);
        assert!(bps_4qam(&[], &BpsConfig::default()).is_err());
        assert!(bps_4qam(
            &sy,
            &BpsConfig {
                num_test_phases: 1,
                window_half: 4
            }
        )
        .is_err());
        assert!(bps_4qam(
            &sy,
            &BpsConfig {
                num_test_phases: 8,
                window_half: 0
            }
        )
        .is_err());
    }
}
