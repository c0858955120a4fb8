//! Complex sample files.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `MFISAMP\0`             |
//! | 8      | 4    | version (u32, currently 1)    |
//! | 12     | 4    | reserved, zero                |
//! | 16     | 8    | sample rate in Hz (f64)       |
//! | 24     | 8    | symbol rate in Hz (f64)       |
//! | 32     | 16·n | samples as (re, im) f64 pairs |
//!
//! Equal sample and symbol rates mean the samples are already at symbol rate.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use mfi_core::Complex64;

pub const MAGIC: [u8; 8] = *b"MFISAMP\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub sample_rate: f64,
    pub symbol_rate: f64,
    pub samples: Vec<Complex64>,
}

impl SampleFile {
    pub fn samples_per_symbol(&self) -> Result<usize> {
        let ratio = self.sample_rate / self.symbol_rate;
        let sps = ratio.round();
        ensure!(
            sps >= 1.0 && (ratio - sps).abs() < 1e-9,
            "sample rate {} is not an integer multiple of symbol rate {}",
            self.sample_rate,
            self.symbol_rate
        );
        Ok(sps as usize)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * self.samples.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&self.symbol_rate.to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.re.to_le_bytes());
            out.extend_from_slice(&s.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        ensure!(
            bytes.len() >= HEADER_LEN,
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        );
        ensure!(bytes[..8] == MAGIC, "bad magic, not a sample file");
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            bail!("unsupported sample file version {version}");
        }
        let (sample_rate, symbol_rate) = (f64_at(16), f64_at(24));
        ensure!(
            sample_rate > 0.0 && sample_rate.is_finite(),
            "invalid sample rate {sample_rate}"
        );
        ensure!(
            symbol_rate > 0.0 && symbol_rate.is_finite(),
            "invalid symbol rate {symbol_rate}"
        );
        let body = &bytes[HEADER_LEN..];
        ensure!(
            body.len() % 16 == 0,
            "sample data is {} bytes, not a whole number of complex pairs",
            body.len()
        );
        let samples = body.chunks_exact(16).map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        });
        Ok(Self {
            sample_rate,
            symbol_rate,
            samples: samples.collect(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SampleFile {
        SampleFile {
            sample_rate: 56e9,
            symbol_rate: 28e9,
            samples: vec![
                Complex64::new(1.5, -0.25),
                Complex64::new(f64::MIN_POSITIVE, 3.0),
            ],
        }
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let s = sample();
        let bytes = s.to_bytes();
        assert_eq!(bytes.len(), 32 + 32);
        assert_eq!(&bytes[..8], b"MFISAMP\0");
        assert_eq!(SampleFile::from_bytes(&bytes).unwrap(), s);
        assert_eq!(s.samples_per_symbol().unwrap(), 2);
    }

    #[test]
    fn malformed_inputs() {
        assert!(SampleFile::from_bytes(&[]).is_err());
        let mut bad = sample().to_bytes();
        bad[0] = b'X';
        assert!(SampleFile::from_bytes(&bad).is_err());
        let mut truncated = sample().to_bytes();
        truncated.pop();
        assert!(SampleFile::from_bytes(&truncated).is_err());
        let mut version = sample().to_bytes();
        version[8] = 9;
        assert!(SampleFile::from_bytes(&version).is_err());
        let odd = SampleFile {
            sample_rate: 50e9,
            symbol_rate: 28e9,
            samples: vec![],
        };
        assert!(odd.samples_per_symbol().is_err());
    }
}
