//! DBSCAN over raw symbols, the runtime baseline for the key-block scheme.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decision::{Decision, DecisionTable};
use crate::error::{MfiError, Result};
use crate::frontend::BpsConfig;
use crate::mfi::phase_process;
use crate::signal::ModFormat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    /// Neighborhood size (including the point itself) that makes a core point.
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(MfiError::InvalidParameter(format!(
                "eps {} must be positive",
                self.eps
            )));
        }
        if self.min_pts < 1 {
            return Err(MfiError::InvalidParameter(
                "min_pts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-format parameters for the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanCalibration {
    #[serde(rename = "format")]
    entries: Vec<CalibrationEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CalibrationEntry {
    format: ModFormat,
    #[serde(flatten)]
    params: DbscanParams,
}

pub const DEFAULT_CALIBRATION_TOML: &str = include_str!("../config/dbscan_params.toml");

impl Default for DbscanCalibration {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CALIBRATION_TOML).expect("shipped calibration is valid")
    }
}

impl DbscanCalibration {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cal: Self = toml::from_str(s).map_err(|e| MfiError::InvalidParameter(e.to_string()))?;
        for e in &cal.entries {
            e.params.validate()?;
        }
        Ok(cal)
    }

    pub fn params(&self, format: ModFormat) -> Option<DbscanParams> {
        self.entries
            .iter()
            .find(|e| e.format == format)
            .map(|e| e.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Noise,
    Cluster(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbscanResult {
    pub labels: Vec<Label>,
    pub clusters: usize,
}

impl DbscanResult {
    pub fn noise(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }
}

/// Uniform grid with cell side `eps`; a radius-`eps` query touches 3x3 cells.
struct GridIndex {
    eps: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl GridIndex {
    fn new(points: &[[f64; 2]], eps: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::cell(p, eps)).or_default().push(i);
        }
        Self { eps, cells }
    }

    fn cell(p: &[f64; 2], eps: f64) -> (i64, i64) {
        ((p[0] / eps).floor() as i64, (p[1] / eps).floor() as i64)
    }

    fn neighbors(&self, points: &[[f64; 2]], i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = &points[i];
        let (cx, cy) = Self::cell(p, self.eps);
        let eps2 = self.eps * self.eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &j in bucket {
                        let q = &points[j];
                        let (ex, ey) = (p[0] - q[0], p[1] - q[1]);
                        if ex * ex + ey * ey <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        // Bucket iteration order is fixed, but sort so expansion order only
        // depends on the input ordering.
        out.sort_unstable();
    }
}

/// Adds unvisited neighbors to cluster `id` and queues them for expansion.
/// Points already marked noise become border points and are not expanded.
fn claim(nbrs: &[usize], labels: &mut [Option<Label>], frontier: &mut Vec<usize>, id: usize) {
    for &q in nbrs {
        match labels[q] {
            None => {
                labels[q] = Some(Label::Cluster(id));
                frontier.push(q);
            }
            Some(Label::Noise) => labels[q] = Some(Label::Cluster(id)),
            Some(Label::Cluster(_)) => {}
        }
    }
}

/// Standard DBSCAN. Border points join the first cluster that reaches them.
pub fn dbscan(points: &[[f64; 2]], params: &DbscanParams) -> Result<DbscanResult> {
    params.validate()?;
    if points.is_empty() {
        return Err(MfiError::EmptyInput("no points to cluster"));
    }
    let index = GridIndex::new(points, params.eps);
    let mut labels: Vec<Option<Label>> = vec![None; points.len()];
    let mut clusters = 0;
    let mut nbrs = Vec::new();
    let mut frontier = Vec::new();

    for i in 0..points.len() {
        if labels[i].is_some() {
            continue;
        }
        index.neighbors(points, i, &mut nbrs);
        if nbrs.len() < params.min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let id = clusters;
        clusters += 1;
        labels[i] = Some(Label::Cluster(id));
        frontier.clear();
        claim(&nbrs, &mut labels, &mut frontier, id);
        while let Some(j) = frontier.pop() {
            index.neighbors(points, j, &mut nbrs);
            if nbrs.len() >= params.min_pts {
                claim(&nbrs, &mut labels, &mut frontier, id);
            }
        }
    }
    Ok(DbscanResult {
        labels: labels
            .into_iter()
            .map(|l| l.unwrap_or(Label::Noise))
            .collect(),
        clusters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanDecision {
    pub format: Decision,
    pub clusters: usize,
}

/// Baseline identification: phase processing, DBSCAN on every symbol, and
/// the cluster count looked up in the same decision table.
pub fn dbscan_mfi(
    symbols: &[Complex64],
    bps: &BpsConfig,
    params: &DbscanParams,
    table: &DecisionTable,
) -> Result<DbscanDecision> {
    let processed = phase_process(symbols, bps)?;
    let points: Vec<[f64; 2]> = processed.iter().map(|z| [z.re, z.im]).collect();
    let result = dbscan(&points, params)?;
    Ok(DbscanDecision {
        format: table.decide(result.clusters),
        clusters: result.clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force reference: core points are those with at least `min_pts`
    /// neighbors (self included); clusters are connected components of core
    /// points under the eps relation. Returns (cluster count, core flags).
    fn naive(points: &[[f64; 2]], p: &DbscanParams) -> (usize, Vec<bool>, Vec<bool>) {
        let n = points.len();
        let near = |i: usize, j: usize| {
            let (dx, dy) = (points[i][0] - points[j][0], points[i][1] - points[j][1]);
            dx * dx + dy * dy <= p.eps * p.eps
        };
        let core: Vec<bool> = (0..n)
            .map(|i| (0..n).filter(|&j| near(i, j)).count() >= p.min_pts)
            .collect();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if !core[s] || comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = count;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if core[j] && comp[j] == usize::MAX && near(i, j) {
                        comp[j] = count;
                        stack.push(j);
                    }
                }
            }
            count += 1;
        }
        let noise = (0..n)
            .map(|i| !core[i] && !(0..n).any(|j| core[j] && near(i, j)))
            .collect();
        (count, core, noise)
    }

    #[test]
    fn separated_groups() {
        let eps = 0.1;
        let mut points = Vec::new();
        for i in 0..50 {
            points.push([0.001 * i as f64, 0.0]);
            points.push([1.0 + 0.001 * i as f64, 0.0]);
        }
        let r = dbscan(&points, &DbscanParams { eps, min_pts: 5 }).unwrap();
        assert_eq!(r.clusters, 2);
        assert_eq!(r.noise(), 0);
    }

    #[test]
    fn sparse_points_are_noise() {
        let points: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 0.0]).collect();
        let r = dbscan(
            &points,
            &DbscanParams {
                eps: 0.5,
                min_pts: 2,
            },
        )
        .unwrap();
        assert_eq!(r.clusters, 0);
        assert_eq!(r.noise(), 20);
    }

    #[test]
    fn errors() {
        assert!(dbscan(
            &[],
            &DbscanParams {
                eps: 0.1,
                min_pts: 1
            }
        )
        .is_err());
        assert!(dbscan(
            &[[0.0, 0.0]],
            &DbscanParams {
                eps: 0.0,
                min_pts: 1
            }
        )
        .is_err());
        assert!(dbscan(
            &[[0.0, 0.0]],
            &DbscanParams {
                eps: 0.1,
                min_pts: 0
            }
        )
        .is_err());
        let table = DecisionTable::default();
        let p = DbscanParams {
            eps: 0.1,
            min_pts: 1,
        };
        assert!(dbscan_mfi(&[], &BpsConfig::default(), &p, &table).is_err());
    }

    #[test]
    fn shipped_calibration_covers_every_format() {
        let cal = DbscanCalibration::default();
        for f in ModFormat::ALL {
            assert!(cal.params(f).is_some(), "{f}");
        }
        assert_eq!(
            cal.params(ModFormat::Qam16),
            Some(DbscanParams {
                eps: 0.04,
                min_pts: 80
            })
        );
        assert!(DbscanCalibration::from_toml_str(
            "[[format]]\nformat = \"QPSK\"\neps = -1.0\nmin_pts = 3\n"
        )
        .is_err());
    }

    #[test]
    fn count_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let centers = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]];
        let mut points: Vec<[f64; 2]> = (0..800)
            .map(|i| {
                let c = centers[i % 4];
                [
                    c[0] + 0.05 * ((i * 7919) % 97) as f64 / 97.0,
                    c[1] + 0.05 * ((i * 104729) % 89) as f64 / 89.0,
                ]
            })
            .collect();
        let p = DbscanParams {
            eps: 0.02,
            min_pts: 4,
        };
        let base = dbscan(&points, &p).unwrap().clusters;
        assert_eq!(base, 4);
        for _ in 0..10 {
            points.shuffle(&mut rng);
            assert_eq!(dbscan(&points, &p).unwrap().clusters, base);
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..150),
            eps in 0.02f64..0.2,
            min_pts in 1usize..6,
        ) {
            let points: Vec<[f64; 2]> = raw.iter().map(|&(x, y)| [x, y]).collect();
            let p = DbscanParams { eps, min_pts };
            let r = dbscan(&points, &p).unwrap();
            let (count, core, noise) = naive(&points, &p);
            prop_assert_eq!(r.clusters, count);
            for (label, &is_noise) in r.labels.iter().zip(&noise) {
                prop_assert_eq!(*label == Label::Noise, is_noise);
            }
            // Core points that are eps-neighbors share a label.
            for i in 0..points.len() {
                for j in 0..points.len() {
                    let (dx, dy) = (points[i][0] - points[j][0], points[i][1] - points[j][1]);
                    if core[i] && core[j] && dx * dx + dy * dy <= eps * eps {
                        prop_assert_eq!(r.labels[i], r.labels[j]);
                    }
                }
            }
        }
    }
}
