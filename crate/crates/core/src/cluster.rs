//! Stage two: nearest-prototype k-partitions of the key blocks, Silhouette
//! scoring, and the k-sweep that picks the best cluster count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MfiError, Result};
use crate::histokey::KeyBlockSet;

pub type Point = [f64; 2];

#[inline]
fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[inline]
fn dist(a: &Point, b: &Point) -> f64 {
    dist2(a, b).sqrt()
}

/// `k` centers and, for every point, the index of the center it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub centers: Vec<Point>,
    pub assignment: Vec<usize>,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    /// Weighted within-cluster sum of squared distances to the centers.
    pub fn inertia(&self, points: &[Point], weights: &[f64]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .zip(weights)
            .map(|((p, &a), w)| w * dist2(p, &self.centers[a]))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub n_init: usize,
    pub max_iter: usize,
    /// Weight center updates by key-bin height.
    pub weighted: bool,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            n_init: 4,
            max_iter: 100,
            weighted: true,
        }
    }
}

/// Index of the nearest center; ties go to the lowest index.
#[inline]
fn nearest(p: &Point, centers: &[Point]) -> (usize, f64) {
    let mut best = (0, dist2(p, &centers[0]));
    for (j, c) in centers.iter().enumerate().skip(1) {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_all(points: &[Point], centers: &[Point], assignment: &mut [usize]) -> bool {
    let mut changed = false;
    for (p, a) in points.iter().zip(assignment.iter_mut()) {
        let (j, _) = nearest(p, centers);
        if *a != j {
            *a = j;
            changed = true;
        }
    }
    changed
}

/// Greedy farthest-point traversal starting at `first`: each next index is
/// the point farthest from all earlier ones (ties to the lowest index). The
/// first `k` entries are the k-center initialization, so one traversal serves
/// every k up to `len`.
fn farthest_point_order(points: &[Point], len: usize, first: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(len);
    order.push(first);
    let mut min_d: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while order.len() < len {
        let next = min_d
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
            .0;
        order.push(next);
        let c = points[next];
        for (d, p) in min_d.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
    }
    order
}

/// One restart's farthest-point traversal plus, for every point, the nearest
/// and second-nearest of the first `k` traversal centers. Advancing `k` by
/// one only has to look at the newly added center.
struct Restart {
    order: Vec<usize>,
    k: usize,
    nearest: Vec<usize>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Restart {
    fn new(points: &[Point], max_k: usize, first: usize) -> Self {
        let n = points.len();
        Self {
            order: farthest_point_order(points, max_k, first),
            k: 0,
            nearest: vec![0; n],
            d1: vec![f64::INFINITY; n],
            d2: vec![f64::INFINITY; n],
        }
    }

    fn advance_to(&mut self, points: &[Point], k: usize) {
        debug_assert!(k >= self.k && k <= self.order.len());
        while self.k < k {
            let c = points[self.order[self.k]];
            for (i, p) in points.iter().enumerate() {
                let d = dist2(p, &c);
                if d < self.d1[i] {
                    self.d2[i] = self.d1[i];
                    self.d1[i] = d;
                    self.nearest[i] = self.k;
                } else if d < self.d2[i] {
                    self.d2[i] = d;
                }
            }
            self.k += 1;
        }
    }
}

/// Initializations for every restart, shared by all k up to `max_k`.
struct Seeding {
    restarts: Vec<Restart>,
}

impl Seeding {
    fn new(points: &[Point], max_k: usize, seed: u64, n_init: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let restarts = (0..n_init.max(1))
            .map(|_| Restart::new(points, max_k, rng.random_range(0..points.len())))
            .collect();
        Self { restarts }
    }
}

/// Moves the center of every empty cluster onto the point lying farthest from
/// its own center. Returns whether anything was reseeded.
fn reseed_empty(points: &[Point], centers: &mut [Point], assignment: &mut [usize]) -> bool {
    let k = centers.len();
    let mut reseeded = false;
    loop {
        let mut sizes = vec![0usize; k];
        assignment.iter().for_each(|&a| sizes[a] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return reseeded;
        };
        let donor = points
            .iter()
            .zip(assignment.iter())
            .enumerate()
            .filter(|(_, (_, &a))| sizes[a] > 1)
            .map(|(i, (p, &a))| (i, dist2(p, &centers[a])))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, d)| {
                if d > acc.1 {
                    (i, d)
                } else {
                    acc
                }
            });
        if donor.0 == usize::MAX {
            // Fewer points than clusters; cannot happen when k <= n.
            return reseeded;
        }
        centers[empty] = points[donor.0];
        assignment[donor.0] = empty;
        reseeded = true;
    }
}

/// Nearest and second-nearest center distances (not squared).
#[inline]
fn two_nearest(p: &Point, cx: &[f64], cy: &[f64], buf: &mut [f64]) -> (usize, f64, f64) {
    for ((d, &x), &y) in buf.iter_mut().zip(cx).zip(cy) {
        let (dx, dy) = (p[0] - x, p[1] - y);
        *d = dx * dx + dy * dy;
    }
    let mut best = (0, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (j, &d) in buf.iter().enumerate() {
        if d < second {
            if d < best.1 {
                second = best.1;
                best = (j, d);
            } else {
                second = d;
            }
        }
    }
    (best.0, best.1.sqrt(), second.sqrt())
}

/// Weighted Lloyd iterations from one restart's first `k` traversal centers,
/// with Hamerly bounds to skip points whose assignment cannot change.
fn lloyd(
    points: &[Point],
    weights: &[f64],
    init: &Restart,
    k: usize,
    max_iter: usize,
) -> Partition {
    let n = points.len();
    let mut centers: Vec<Point> = init.order[..k].iter().map(|&i| points[i]).collect();
    let mut assignment = init.nearest.clone();
    let mut upper: Vec<f64> = init.d1.iter().map(|d| d.sqrt()).collect();
    let mut lower: Vec<f64> = init.d2.iter().map(|d| d.sqrt()).collect();
    let mut cx = vec![0.0; k];
    let mut cy = vec![0.0; k];
    let mut buf = vec![0.0; k];
    let full_pass =
        |centers: &[Point], assignment: &mut [usize], upper: &mut [f64], lower: &mut [f64]| {
            let cx: Vec<f64> = centers.iter().map(|c| c[0]).collect();
            let cy: Vec<f64> = centers.iter().map(|c| c[1]).collect();
            let mut buf = vec![0.0; centers.len()];
            for i in 0..n {
                let (j, d1, d2) = two_nearest(&points[i], &cx, &cy, &mut buf);
                assignment[i] = j;
                upper[i] = d1;
                lower[i] = d2;
            }
        };

    let mut sums = vec![[0.0f64; 3]; k];
    let mut moved = vec![0.0f64; k];
    let mut half_gap = vec![0.0f64; k];
    for _ in 0..max_iter {
        sums.iter_mut().for_each(|s| *s = [0.0; 3]);
        for ((p, &a), &w) in points.iter().zip(&assignment).zip(weights) {
            let s = &mut sums[a];
            s[0] += w * p[0];
            s[1] += w * p[1];
            s[2] += w;
        }
        for ((c, s), m) in centers.iter_mut().zip(&sums).zip(moved.iter_mut()) {
            *m = 0.0;
            if s[2] > 0.0 {
                let next = [s[0] / s[2], s[1] / s[2]];
                *m = dist(c, &next);
                *c = next;
            }
        }
        if reseed_empty(points, &mut centers, &mut assignment) {
            full_pass(&centers, &mut assignment, &mut upper, &mut lower);
            continue;
        }

        let (mut r1, mut m1, mut m2) = (0, 0.0f64, 0.0f64);
        for (j, &m) in moved.iter().enumerate() {
            if m > m1 {
                m2 = m1;
                m1 = m;
                r1 = j;
            } else if m > m2 {
                m2 = m;
            }
        }
        for (j, g) in half_gap.iter_mut().enumerate() {
            *g = 0.5
                * centers
                    .iter()
                    .enumerate()
                    .filter(|&(q, _)| q != j)
                    .map(|(_, c)| dist2(c, &centers[j]))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
        }

        for (j, c) in centers.iter().enumerate() {
            cx[j] = c[0];
            cy[j] = c[1];
        }
        let mut changed = false;
        for i in 0..n {
            let a = assignment[i];
            upper[i] += moved[a];
            lower[i] -= if a == r1 { m2 } else { m1 };
            let bound = half_gap[a].max(lower[i]);
            if upper[i] < bound {
                continue;
            }
            upper[i] = dist(&points[i], &centers[a]);
            if upper[i] < bound {
                continue;
            }
            let (j, d1, d2) = two_nearest(&points[i], &cx, &cy, &mut buf);
            if j != a {
                assignment[i] = j;
                changed = true;
            }
            upper[i] = d1;
            lower[i] = d2;
        }
        if !changed {
            break;
        }
    }
    // The iteration cap can leave a cluster empty after the last assignment.
    // Coincident points can keep emptying a cluster under the lowest-index
    // tie rule, so the last reseed stands without reassignment.
    for _ in 0..k {
        if !reseed_empty(points, &mut centers, &mut assignment) {
            break;
        }
        assign_all(points, &centers, &mut assignment);
    }
    reseed_empty(points, &mut centers, &mut assignment);
    Partition {
        centers,
        assignment,
    }
}

/// Nearest-prototype k-partition refined to a local optimum.
///
/// Each restart starts from a greedy farthest-point initialization seeded at a
/// random point, alternates nearest-center assignment with (optionally
/// height-weighted) centroid updates, and stops when assignments settle or
/// after `max_iter` rounds. The restart with the lowest weighted inertia wins.
pub fn partition_k(
    points: &KeyBlockSet,
    k: usize,
    seed: u64,
    cfg: &PartitionConfig,
) -> Result<Partition> {
    let weights = if cfg.weighted {
        points.weights()
    } else {
        vec![1.0; points.len()]
    };
    partition_points(&points.points, &weights, k, seed, cfg)
}

pub fn partition_points(
    points: &[Point],
    weights: &[f64],
    k: usize,
    seed: u64,
    cfg: &PartitionConfig,
) -> Result<Partition> {
    if points.is_empty() {
        return Err(MfiError::EmptyInput("no points to partition"));
    }
    if k == 0 || k > points.len() {
        return Err(MfiError::InvalidK {
            k,
            points: points.len(),
        });
    }
    if weights.len() != points.len() {
        return Err(MfiError::InvalidParameter(
            "weights and points differ in length".into(),
        ));
    }
    if k == 1 {
        let total: f64 = weights.iter().sum();
        let (sx, sy) = points
            .iter()
            .zip(weights)
            .fold((0.0, 0.0), |(sx, sy), (p, w)| {
                (sx + w * p[0], sy + w * p[1])
            });
        return Ok(Partition {
            centers: vec![[sx / total, sy / total]],
            assignment: vec![0; points.len()],
        });
    }
    let mut seeding = Seeding::new(points, k, seed, cfg.n_init);
    Ok(partition_seeded(points, weights, k, &mut seeding, cfg))
}

fn partition_seeded(
    points: &[Point],
    weights: &[f64],
    k: usize,
    seeding: &mut Seeding,
    cfg: &PartitionConfig,
) -> Partition {
    let mut best: Option<(f64, Partition)> = None;
    for restart in &mut seeding.restarts {
        restart.advance_to(points, k);
        let part = lloyd(points, weights, restart, k, cfg.max_iter);
        let cost = part.inertia(points, weights);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, part));
        }
    }
    best.expect("at least one restart").1
}

/// Cohesion divisor convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SilhouetteMode {
    /// Cohesion averages over the whole own cluster including the point itself
    /// (divisor `|c_p|`), so singletons score 1.
    #[default]
    Literal,
    /// Rousseeuw's definition: divisor `|c_p| - 1`, singletons score 0.
    Classical,
}

/// Dense symmetric matrix of pairwise Euclidean distances.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(points: &[Point]) -> Self {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = dist(&points[i], &points[j]);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

/// Per-point Silhouette values computed from a precomputed distance matrix.
pub fn silhouette_values_with(
    dm: &DistanceMatrix,
    assignment: &[usize],
    k: usize,
    mode: SilhouetteMode,
) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(MfiError::UndefinedSeparation(k));
    }
    if assignment.len() != dm.len() {
        return Err(MfiError::InvalidParameter(
            "assignment length differs from point count".into(),
        ));
    }
    let mut sizes = vec![0usize; k];
    for &a in assignment {
        if a >= k {
            return Err(MfiError::InvalidParameter(format!(
                "assignment {a} out of range for k = {k}"
            )));
        }
        sizes[a] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(MfiError::EmptyCluster(empty));
    }

    // sums[c * n + i] = total distance from point i to the members of cluster c.
    // Built one member row at a time, which keeps the inner loop a plain
    // vector add.
    let n = dm.len();
    let mut sums = vec![0.0f64; k * n];
    for (j, &c) in assignment.iter().enumerate() {
        for (acc, d) in sums[c * n..(c + 1) * n].iter_mut().zip(dm.row(j)) {
            *acc += d;
        }
    }

    let mut out = vec![0.0f64; n];
    for (i, &own) in assignment.iter().enumerate() {
        let cohesion = match mode {
            SilhouetteMode::Literal => sums[own * n + i] / sizes[own] as f64,
            SilhouetteMode::Classical if sizes[own] == 1 => {
                out[i] = 0.0;
                continue;
            }
            SilhouetteMode::Classical => sums[own * n + i] / (sizes[own] - 1) as f64,
        };
        let separation = (0..k)
            .filter(|&q| q != own)
            .map(|q| sums[q * n + i] / sizes[q] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = cohesion.max(separation);
        out[i] = if denom > 0.0 {
            (separation - cohesion) / denom
        } else {
            0.0
        };
    }
    Ok(out)
}

pub fn silhouette_values(
    points: &[Point],
    partition: &Partition,
    mode: SilhouetteMode,
) -> Result<Vec<f64>> {
    silhouette_values_with(
        &DistanceMatrix::new(points),
        &partition.assignment,
        partition.k(),
        mode,
    )
}

/// Mean Silhouette over all points (the partition evaluation function `f`).
pub fn silhouette_f(points: &[Point], partition: &Partition) -> Result<f64> {
    silhouette_f_mode(points, partition, SilhouetteMode::Literal)
}

pub fn silhouette_f_mode(
    points: &[Point],
    partition: &Partition,
    mode: SilhouetteMode,
) -> Result<f64> {
    let s = silhouette_values(points, partition, mode)?;
    Ok(mean(&s))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsweepResult {
    /// `(k, f(P_k))` for k = 2 ..= min(m, n), ascending in k.
    pub f_values: Vec<(usize, f64)>,
    pub k_star: usize,
    pub m: usize,
}

impl KsweepResult {
    pub fn f_max(&self) -> f64 {
        self.f_at(self.k_star).unwrap_or(f64::NAN)
    }

    pub fn f_at(&self, k: usize) -> Option<f64> {
        self.f_values
            .iter()
            .find(|(kk, _)| *kk == k)
            .map(|(_, f)| *f)
    }

    /// `k,f` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,f\n");
        for (k, f) in &self.f_values {
            s.push_str(&format!("{k},{f}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Largest partition count tried.
    pub m: usize,
    pub partition: PartitionConfig,
    pub silhouette: SilhouetteMode,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            m: 100,
            partition: PartitionConfig::default(),
            silhouette: SilhouetteMode::Literal,
        }
    }
}

/// Scores `P_k` for every k in 2 ..= min(m, n) and returns the argmax
/// (smallest k on ties). One cluster has no separation term, so k = 1 is
/// not part of the sweep.
pub fn best_k(points: &KeyBlockSet, seed: u64, cfg: &SweepConfig) -> Result<KsweepResult> {
    if points.len() < 2 {
        return Err(MfiError::InvalidParameter(format!(
            "k-sweep needs at least 2 points, got {}",
            points.len()
        )));
    }
    if cfg.m < 2 {
        return Err(MfiError::InvalidParameter(format!(
            "sweep limit m = {} must be at least 2",
            cfg.m
        )));
    }
    let weights = if cfg.partition.weighted {
        points.weights()
    } else {
        vec![1.0; points.len()]
    };
    let dm = DistanceMatrix::new(&points.points);
    let upper = cfg.m.min(points.len());
    let mut f_values = Vec::with_capacity(upper - 1);
    let mut seeding = Seeding::new(&points.points, upper, seed, cfg.partition.n_init);
    for k in 2..=upper {
        let part = partition_seeded(&points.points, &weights, k, &mut seeding, &cfg.partition);
        let s = silhouette_values_with(&dm, &part.assignment, k, cfg.silhouette)?;
        f_values.push((k, mean(&s)));
    }
    let (k_star, _) =
        f_values.iter().fold(
            (0, f64::NEG_INFINITY),
            |acc, &(k, f)| if f > acc.1 { (k, f) } else { acc },
        );
    Ok(KsweepResult {
        f_values,
        k_star,
        m: cfg.m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    /// Direct evaluation of the cohesion/separation formulas, one point at a time.
    fn naive_silhouette(points: &[Point], assignment: &[usize], k: usize) -> f64 {
        let d = |a: &Point, b: &Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            let mean_to = |c: usize| {
                let members: Vec<&Point> = points
                    .iter()
                    .zip(assignment)
                    .filter(|(_, &a)| a == c)
                    .map(|(q, _)| q)
                    .collect();
                members.iter().map(|q| d(p, q)).sum::<f64>() / members.len() as f64
            };
            let cohesion = mean_to(assignment[i]);
            let separation = (0..k)
                .filter(|&c| c != assignment[i])
                .map(mean_to)
                .fold(f64::INFINITY, f64::min);
            let m = cohesion.max(separation);
            total += if m == 0.0 {
                0.0
            } else {
                (separation - cohesion) / m
            };
        }
        total / points.len() as f64
    }

    fn blobs(centers: &[Point], per: usize, spread: f64, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, spread).unwrap();
        centers
            .iter()
            .flat_map(|c| {
                (0..per)
                    .map(|_| [c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)])
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn key_blocks(points: Vec<Point>) -> KeyBlockSet {
        let heights = vec![1; points.len()];
        KeyBlockSet { points, heights }
    }

    fn by_assignment(points: &[Point], assignment: Vec<usize>) -> Partition {
        let k = assignment.iter().max().unwrap() + 1;
        let mut centers = vec![[0.0; 2]; k];
        let mut counts = vec![0.0; k];
        for (p, &a) in points.iter().zip(&assignment) {
            centers[a][0] += p[0];
            centers[a][1] += p[1];
            counts[a] += 1.0;
        }
        for (c, n) in centers.iter_mut().zip(counts) {
            *c = [c[0] / n, c[1] / n];
        }
        Partition {
            centers,
            assignment,
        }
    }

    #[test]
    fn worked_two_cluster_value() {
        let points = [[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let part = by_assignment(&points, vec![0, 0, 1, 1]);
        let f = silhouette_f(&points, &part).unwrap();
        let out = (10.0 + 101f64.sqrt()) / 2.0;
        let expected = (out - 0.5) / out;
        assert!((f - expected).abs() < 1e-12);
        assert!((f - 0.95012).abs() < 1e-4);
    }

    #[test]
    fn singleton_scores_one_in_literal_mode() {
        let points = [[0.0, 0.0], [0.0, 1.0], [5.0, 5.0]];
        let part = by_assignment(&points, vec![0, 0, 1]);
        let s = silhouette_values(&points, &part, SilhouetteMode::Literal).unwrap();
        assert_eq!(s[2], 1.0);
        let c = silhouette_values(&points, &part, SilhouetteMode::Classical).unwrap();
        assert_eq!(c[2], 0.0);
    }

    #[test]
    fn coincident_points_score_zero() {
        let points = [[0.3, 0.3]; 4];
        let part = by_assignment(&points, vec![0, 1, 0, 1]);
        assert_eq!(silhouette_f(&points, &part).unwrap(), 0.0);
    }

    #[test]
    fn silhouette_rejects_bad_partitions() {
        let points = [[0.0, 0.0], [1.0, 0.0]];
        let one = Partition {
            centers: vec![[0.5, 0.0]],
            assignment: vec![0, 0],
        };
        assert_eq!(
            silhouette_f(&points, &one),
            Err(MfiError::UndefinedSeparation(1))
        );
        let hole = Partition {
            centers: vec![[0.0, 0.0], [1.0, 0.0], [9.0, 9.0]],
            assignment: vec![0, 1],
        };
        assert_eq!(silhouette_f(&points, &hole), Err(MfiError::EmptyCluster(2)));
    }

    #[test]
    fn classical_mode_matches_textbook_value() {
        // Classical: a = 1 (one other member at distance 1), b = mean(10, sqrt 101).
        let points = [[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let part = by_assignment(&points, vec![0, 0, 1, 1]);
        let b = (10.0 + 101f64.sqrt()) / 2.0;
        let f = silhouette_f_mode(&points, &part, SilhouetteMode::Classical).unwrap();
        assert!((f - (b - 1.0) / b).abs() < 1e-12);
    }

    #[test]
    fn k_one_is_weighted_mean() {
        let points = [[0.0, 0.0], [1.0, 0.0], [0.0, 4.0]];
        let part =
            partition_points(&points, &[2.0, 1.0, 1.0], 1, 0, &PartitionConfig::default()).unwrap();
        assert_eq!(part.centers, vec![[0.25, 1.0]]);
        assert_eq!(part.assignment, vec![0, 0, 0]);
    }

    #[test]
    fn k_equal_n_gives_zero_inertia() {
        let points = blobs(&[[0.0, 0.0]], 12, 1.0, 3);
        let w = vec![1.0; points.len()];
        let part =
            partition_points(&points, &w, points.len(), 1, &PartitionConfig::default()).unwrap();
        assert_eq!(part.inertia(&points, &w), 0.0);
        assert!(part.cluster_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn partition_errors() {
        let points = [[0.0, 0.0], [1.0, 1.0]];
        let cfg = PartitionConfig::default();
        assert_eq!(
            partition_points(&[], &[], 1, 0, &cfg),
            Err(MfiError::EmptyInput("no points to partition"))
        );
        assert_eq!(
            partition_points(&points, &[1.0; 2], 3, 0, &cfg),
            Err(MfiError::InvalidK { k: 3, points: 2 })
        );
        assert_eq!(
            partition_points(&points, &[1.0; 2], 0, 0, &cfg),
            Err(MfiError::InvalidK { k: 0, points: 2 })
        );
        assert!(partition_points(&points, &[1.0], 1, 0, &cfg).is_err());
    }

    #[test]
    fn recovers_four_groups() {
        let truth = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
        let points = blobs(&truth, 160, 0.05, 11);
        let part = partition_k(&key_blocks(points), 4, 5, &PartitionConfig::default()).unwrap();
        for t in truth {
            let closest = part
                .centers
                .iter()
                .map(|c| dist(c, &t))
                .fold(f64::INFINITY, f64::min);
            assert!(closest < 0.02, "no center near {t:?}: {:?}", part.centers);
        }
    }

    #[test]
    fn sweep_finds_four_and_sixteen_groups() {
        let four = blobs(
            &[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
            40,
            0.05,
            2,
        );
        let r = best_k(&key_blocks(four), 9, &SweepConfig::default()).unwrap();
        assert_eq!(r.k_star, 4);

        let s = 10f64.sqrt();
        let levels = [-3.0 / s, -1.0 / s, 1.0 / s, 3.0 / s];
        let grid: Vec<Point> = levels
            .iter()
            .flat_map(|&x| levels.iter().map(move |&y| [x, y]))
            .collect();
        let sixteen = blobs(&grid, 40, 0.03, 4);
        let r = best_k(&key_blocks(sixteen.clone()), 9, &SweepConfig::default()).unwrap();
        assert_eq!(r.k_star, 16);
        assert_eq!(r.f_values.len(), 99);
        assert_eq!(r.f_values.first().unwrap().0, 2);

        // Oracle cross-check: the curve value at 16 equals the naive formula
        // on the returned partition.
        let kb = key_blocks(sixteen);
        let part = partition_k(&kb, 16, 9, &PartitionConfig::default()).unwrap();
        let f = silhouette_f(&kb.points, &part).unwrap();
        assert!((f - naive_silhouette(&kb.points, &part.assignment, 16)).abs() < 1e-9);
    }

    #[test]
    fn sweep_limits_and_errors() {
        let kb = key_blocks(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let r = best_k(&kb, 0, &SweepConfig::default()).unwrap();
        assert_eq!(
            r.f_values.iter().map(|v| v.0).collect::<Vec<_>>(),
            vec![2, 3]
        );
        assert!(best_k(&key_blocks(vec![[0.0, 0.0]]), 0, &SweepConfig::default()).is_err());
        let cfg = SweepConfig {
            m: 1,
            ..SweepConfig::default()
        };
        assert!(best_k(&kb, 0, &cfg).is_err());
    }

    #[test]
    fn ties_pick_smallest_k() {
        // Coincident points give a flat curve at 0.
        let kb = key_blocks(vec![[0.5, 0.5]; 6]);
        let r = best_k(&kb, 0, &SweepConfig::default()).unwrap();
        assert!(r.f_values.iter().all(|&(_, f)| f == 0.0));
        assert_eq!(r.k_star, 2);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let r = KsweepResult {
            f_values: vec![(2, 0.5), (3, 0.25)],
            k_star: 2,
            m: 3,
        };
        assert_eq!(r.to_csv(), "k,f\n2,0.5\n3,0.25\n");
        assert_eq!(r.f_max(), 0.5);
    }

    fn instance() -> impl Strategy<Value = (Vec<Point>, Vec<usize>, usize)> {
        (2usize..=6)
            .prop_flat_map(|k| {
                (k..=50).prop_flat_map(move |n| {
                    (
                        // A small lattice makes coincident points common.
                        prop::collection::vec((-4i32..=4, -4i32..=4), n),
                        prop::collection::vec(0..k, n - k),
                        Just(k),
                    )
                })
            })
            .prop_map(|(coords, rest, k)| {
                let points = coords
                    .into_iter()
                    .map(|(x, y)| [x as f64 * 0.25, y as f64 * 0.25])
                    .collect();
                // The first k points cover every cluster.
                let assignment = (0..k).chain(rest).collect();
                (points, assignment, k)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn silhouette_matches_naive_oracle((points, assignment, k) in instance()) {
            let dm = DistanceMatrix::new(&points);
            let s = silhouette_values_with(&dm, &assignment, k, SilhouetteMode::Literal).unwrap();
            let f = mean(&s);
            prop_assert!((f - naive_silhouette(&points, &assignment, k)).abs() < 1e-9);
            prop_assert!(s.iter().all(|v| (-1.0..=1.0).contains(v)));
        }

        #[test]
        fn sweep_curve_is_scale_invariant(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..40),
            exp in -4i32..=4,
            seed in any::<u64>(),
        ) {
            let points: Vec<Point> = raw.iter().map(|&(x, y)| [x, y]).collect();
            let heights: Vec<u64> = (0..points.len() as u64).map(|i| 1 + i % 5).collect();
            let scale = 2f64.powi(exp);
            let base = best_k(&KeyBlockSet { points: points.clone(), heights: heights.clone() }, seed, &SweepConfig::default()).unwrap();
            let scaled_points = points.iter().map(|p| [p[0] * scale, p[1] * scale]).collect();
            let scaled = best_k(&KeyBlockSet { points: scaled_points, heights }, seed, &SweepConfig::default()).unwrap();
            prop_assert_eq!(base, KsweepResult { m: 100, ..scaled });
        }

        #[test]
        fn partition_is_nearest_center_fixed_point(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..60),
            k in 1usize..8,
            seed in any::<u64>(),
        ) {
            let points: Vec<Point> = raw.iter().map(|&(x, y)| [x, y]).collect();
            let k = k.min(points.len());
            let w = vec![1.0; points.len()];
            let part = partition_points(&points, &w, k, seed, &PartitionConfig::default()).unwrap();
            prop_assert!(part.cluster_sizes().iter().all(|&s| s > 0));
            for (p, &a) in points.iter().zip(&part.assignment) {
                let own = dist2(p, &part.centers[a]);
                prop_assert!(part.centers.iter().all(|c| dist2(p, c) >= own));
            }
        }
    }
}
