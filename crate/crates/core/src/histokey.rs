//! Constellation-plane histogram and key-block extraction.
//!
//! The plane `[-A, A]²` is split into a uniform `grid × grid` lattice. The
//! highest-count bins are the key bins; their centers are the key blocks that
//! feed the clustering stage.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{MfiError, Result};

pub const DEFAULT_GRID_SIZE: usize = 80;
pub const DEFAULT_EXTENT: f64 = 2.2;
pub const DEFAULT_KEY_BLOCKS: usize = 640;

/// A `grid × grid` count histogram over `[-extent, extent]²`.
///
/// `counts` is row-major: row `r` covers the `r`-th imaginary-axis interval
/// (ascending), column `c` the `c`-th real-axis interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram2D {
    counts: Vec<u64>,
    grid_size: usize,
    extent_bits: u64,
}

impl Histogram2D {
    pub fn empty(grid_size: usize, extent: f64) -> Result<Self> {
        if grid_size == 0 {
            return Err(MfiError::InvalidParameter(
                "grid size must be positive".into(),
            ));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(MfiError::InvalidParameter(format!(
                "extent {extent} must be positive"
            )));
        }
        Ok(Self {
            counts: vec![0; grid_size * grid_size],
            grid_size,
            extent_bits: extent.to_bits(),
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn extent(&self) -> f64 {
        f64::from_bits(self.extent_bits)
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * self.extent() / self.grid_size as f64
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.grid_size + col]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn nonzero_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Bin index along one axis; values outside the extent clamp to the edge.
    pub fn axis_bin(&self, v: f64) -> usize {
        let idx = ((v + self.extent()) / self.bin_width()).floor();
        if idx.is_nan() || idx < 0.0 {
            0
        } else {
            (idx as usize).min(self.grid_size - 1)
        }
    }

    /// `(row, col)` for a symbol.
    pub fn bin_of(&self, z: Complex64) -> (usize, usize) {
        (self.axis_bin(z.im), self.axis_bin(z.re))
    }

    pub fn bin_center(&self, row: usize, col: usize) -> [f64; 2] {
        let w = self.bin_width();
        let a = self.extent();
        [-a + (col as f64 + 0.5) * w, -a + (row as f64 + 0.5) * w]
    }

    pub fn accumulate(&mut self, symbols: &[Complex64]) {
        for &z in symbols {
            let (r, c) = self.bin_of(z);
            self.counts[r * self.grid_size + c] += 1;
        }
    }

    /// Adds another histogram over the same grid.
    pub fn merge(&mut self, other: &Histogram2D) -> Result<()> {
        if other.grid_size != self.grid_size || other.extent_bits != self.extent_bits {
            return Err(MfiError::InvalidParameter("histogram grids differ".into()));
        }
        self.counts
            .iter_mut()
            .zip(&other.counts)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// One line per row, comma-separated counts, row 0 first.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.counts.len() * 3);
        for row in self.counts.chunks(self.grid_size) {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn build_histogram(
    symbols: &[Complex64],
    grid_size: usize,
    extent: f64,
) -> Result<Histogram2D> {
    if symbols.is_empty() {
        return Err(MfiError::EmptyInput("no symbols to histogram"));
    }
    let mut hist = Histogram2D::empty(grid_size, extent)?;
    hist.accumulate(symbols);
    Ok(hist)
}

/// Key-block centers and the heights of their bins, highest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyBlockSet {
    pub points: Vec<[f64; 2]>,
    pub heights: Vec<u64>,
}

impl KeyBlockSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.heights.iter().map(|&h| h as f64).collect()
    }

    /// Same points with unit heights.
    pub fn unweighted(&self) -> KeyBlockSet {
        KeyBlockSet {
            points: self.points.clone(),
            heights: vec![1; self.points.len()],
        }
    }

    /// Every point multiplied by `s`.
    pub fn scaled(&self, s: f64) -> KeyBlockSet {
        KeyBlockSet {
            points: self.points.iter().map(|p| [p[0] * s, p[1] * s]).collect(),
            heights: self.heights.clone(),
        }
    }
}

/// The `count` highest bins, ordered by (count desc, row asc, col asc).
/// Zero-height bins are never selected.
pub fn select_key_blocks(hist: &Histogram2D, count: usize) -> Result<KeyBlockSet> {
    let g = hist.grid_size();
    let mut order: Vec<usize> = (0..g * g).filter(|&i| hist.counts[i] > 0).collect();
    if order.is_empty() {
        return Err(MfiError::EmptyHistogram);
    }
    // Flat index is row * g + col, so ascending index is (row asc, col asc).
    order.sort_unstable_by(|&a, &b| hist.counts[b].cmp(&hist.counts[a]).then(a.cmp(&b)));
    order.truncate(count);
    Ok(KeyBlockSet {
        points: order
            .iter()
            .map(|&i| hist.bin_center(i / g, i % g))
            .collect(),
        heights: order.iter().map(|&i| hist.counts[i]).collect(),
    })
}
