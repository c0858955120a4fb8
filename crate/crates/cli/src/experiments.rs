//! Seeded trial matrices for the k-sweep, accuracy, dispersion-tolerance and
//! runtime experiments.
//!
//! Every trial draws its channel from `derive_seed(base, [format, grid point,
//! trial])`, so trials are independent and results do not depend on the
//! number of worker threads.

use std::io::Write;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use mfi_core::mfi::{classify_key_blocks, extract_key_blocks};
use mfi_core::signal::simulate_link_with;
use mfi_core::{
    compensate_cd, dbscan_mfi, derive_seed, identify, to_symbol_rate, Complex64, Decision,
    ImpairmentSpec, LinkConfig, MfiConfig, MfiDecision, ModFormat,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Seed of one trial's channel realization.
pub fn trial_seed(base: u64, format: ModFormat, grid_point: usize, trial: usize) -> u64 {
    derive_seed(
        base,
        &[format.index() as u64, grid_point as u64, trial as u64],
    )
}

/// Simulates one frame and returns the matched-filtered symbol-rate samples.
///
/// With `residual_cd = Some(r)` the fiber adds the configured line dispersion
/// and the receiver compensates all but `r` of it.
pub fn receive(
    cfg: &ExperimentConfig,
    format: ModFormat,
    n_symbols: usize,
    osnr_db: f64,
    residual_cd: Option<f64>,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let link = LinkConfig {
        symbol_rate: cfg.symbol_rate,
        samples_per_symbol: cfg.samples_per_symbol,
        rolloff: cfg.rolloff,
    };
    let applied = residual_cd.map_or(0.0, |_| cfg.line_cd_ps_nm);
    let spec = ImpairmentSpec {
        osnr_db,
        linewidth_hz: cfg.linewidth_hz,
        applied_cd_ps_nm: applied,
        seed,
    };
    let mut frame = simulate_link_with(format, n_symbols, &spec, &link)?;
    if let Some(r) = residual_cd {
        frame = compensate_cd(&frame, cfg.line_cd_ps_nm - r)?;
    }
    Ok(to_symbol_rate(&frame, cfg.rolloff, 0)?)
}

fn run_identify(
    cfg: &ExperimentConfig,
    mfi: &MfiConfig,
    format: ModFormat,
    osnr_db: f64,
    residual_cd: Option<f64>,
    seed: u64,
) -> Result<MfiDecision> {
    let symbols = receive(cfg, format, cfg.n_symbols, osnr_db, residual_cd, seed)?;
    Ok(identify(
        &symbols,
        &mfi.clone().with_seed(derive_seed(seed, &[3])),
    )?)
}

/// Runs `work` on every item in a pool of `jobs` threads (0 = all cores) and
/// returns the results in input order.
fn parallel<T, R, F>(jobs: usize, items: &[T], work: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    pool.install(|| items.par_iter().map(&work).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsweepRow {
    pub format: ModFormat,
    pub osnr_db: f64,
    pub trial: usize,
    pub k_star: usize,
    pub f_max: Option<f64>,
    pub decision: String,
}

/// k* for every (format, OSNR, trial), in that nesting order.
pub fn run_ksweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<KsweepRow>> {
    cfg.validate()?;
    let mfi = cfg.pipeline.to_mfi()?;
    let mut items = Vec::new();
    for &format in &cfg.formats {
        for (g, &osnr) in cfg.osnr_grid_db.iter().enumerate() {
            for t in 0..cfg.trials {
                items.push((format, g, osnr, t));
            }
        }
    }
    parallel(jobs, &items, |&(format, g, osnr, t)| {
        let d = run_identify(
            cfg,
            &mfi,
            format,
            osnr,
            None,
            trial_seed(cfg.seed, format, g, t),
        )?;
        Ok(KsweepRow {
            format,
            osnr_db: osnr,
            trial: t,
            k_star: d.k_star,
            f_max: d.f_max,
            decision: d.format.to_string(),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub format: ModFormat,
    pub osnr_db: f64,
    pub trials: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Fraction of trials decided as the transmitted format, per (format, OSNR).
pub fn run_accuracy(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<AccuracyRow>> {
    let rows = run_ksweep(cfg, jobs)?;
    Ok(rows
        .chunks(cfg.trials)
        .map(|chunk| {
            let format = chunk[0].format;
            let correct = chunk
                .iter()
                .filter(|r| r.decision == Decision::Format(format).to_string())
                .count();
            AccuracyRow {
                format,
                osnr_db: chunk[0].osnr_db,
                trials: chunk.len(),
                correct,
                accuracy: correct as f64 / chunk.len() as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdToleranceRow {
    pub format: ModFormat,
    pub osnr_db: f64,
    pub residual_cd_ps_nm: f64,
    pub trials: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Accuracy against residual dispersion at each format's operating OSNR.
pub fn run_cd_tolerance(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<CdToleranceRow>> {
    cfg.validate()?;
    let mfi = cfg.pipeline.to_mfi()?;
    let mut items = Vec::new();
    for &format in &cfg.formats {
        for (g, &cd) in cfg.cd_grid_ps_nm.iter().enumerate() {
            for t in 0..cfg.trials {
                items.push((format, g, cd, t));
            }
        }
    }
    let hits = parallel(jobs, &items, |&(format, g, cd, t)| {
        let osnr = cfg.operating_osnr(format);
        let d = run_identify(
            cfg,
            &mfi,
            format,
            osnr,
            Some(cd),
            trial_seed(cfg.seed, format, g, t),
        )?;
        Ok(d.format == Decision::Format(format))
    })?;
    Ok(items
        .chunks(cfg.trials)
        .zip(hits.chunks(cfg.trials))
        .map(|(group, hits)| {
            let (format, _, cd, _) = group[0];
            let correct = hits.iter().filter(|&&h| h).count();
            CdToleranceRow {
                format,
                osnr_db: cfg.operating_osnr(format),
                residual_cd_ps_nm: cd,
                trials: hits.len(),
                correct,
                accuracy: correct as f64 / hits.len() as f64,
            }
        })
        .collect())
}

/// Median wall time of `reps` runs of `f` after `warmup` untimed runs, plus
/// the last result.
pub fn median_time<T>(
    warmup: usize,
    reps: usize,
    mut f: impl FnMut() -> Result<T>,
) -> Result<(Duration, T)> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(reps.max(1));
    let mut last = None;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let out = f()?;
        times.push(start.elapsed());
        last = Some(out);
    }
    times.sort_unstable();
    Ok((
        times[times.len() / 2],
        last.expect("at least one repetition"),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityTrialRow {
    pub format: ModFormat,
    pub trial: usize,
    pub n_symbols: usize,
    pub osnr_db: f64,
    pub key_blocks: usize,
    pub k_star: usize,
    pub dbscan_clusters: usize,
    pub proposed_s: f64,
    pub stage2_s: f64,
    pub dbscan_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexitySummaryRow {
    pub format: ModFormat,
    pub method: &'static str,
    pub mean_runtime_s: f64,
    /// Mean runtime over the slowest mean of any (format, method).
    pub relative_runtime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub format: ModFormat,
    pub n_symbols: usize,
    pub key_blocks: usize,
    pub stage2_s: f64,
    pub dbscan_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub summary: Vec<ComplexitySummaryRow>,
    pub trials: Vec<ComplexityTrialRow>,
    pub scaling: Vec<ScalingRow>,
}

pub const METHOD_PROPOSED: &str = "proposed";
pub const METHOD_DBSCAN: &str = "dbscan";

/// Times identification against the DBSCAN baseline on the same frames.
/// Runs on the calling thread only so both methods see the same machine.
pub fn run_complexity(cfg: &ExperimentConfig) -> Result<ComplexityReport> {
    cfg.validate()?;
    let mfi = cfg.pipeline.to_mfi()?;
    let cal = cfg.complexity.calibration()?;
    let cx = &cfg.complexity;
    let mut trials = Vec::new();
    let mut scaling = Vec::new();
    for &format in &cfg.formats {
        let params = cal
            .params(format)
            .with_context(|| format!("no DBSCAN parameters for {format}"))?;
        let osnr = cfg.operating_osnr(format);
        for t in 0..cx.trials {
            let seed = trial_seed(cfg.seed, format, 0, t);
            let symbols = receive(cfg, format, cfg.n_symbols, osnr, None, seed)?;
            let mfi = mfi.clone().with_seed(derive_seed(seed, &[3]));
            let (proposed, decision) =
                median_time(cx.warmup, cx.reps, || Ok(identify(&symbols, &mfi)?))?;
            let kb = extract_key_blocks(&symbols, &mfi)?;
            let (stage2, _) = median_time(cx.warmup, cx.reps, || {
                Ok(classify_key_blocks(kb.clone(), &mfi)?)
            })?;
            let (dbscan, db) = median_time(cx.warmup, cx.reps, || {
                Ok(dbscan_mfi(&symbols, &mfi.bps, &params, &mfi.table)?)
            })?;
            trials.push(ComplexityTrialRow {
                format,
                trial: t,
                n_symbols: symbols.len(),
                osnr_db: osnr,
                key_blocks: kb.len(),
                k_star: decision.k_star,
                dbscan_clusters: db.clusters,
                proposed_s: proposed.as_secs_f64(),
                stage2_s: stage2.as_secs_f64(),
                dbscan_s: dbscan.as_secs_f64(),
            });
        }
        for (g, &n) in cx.scaling_sizes.iter().enumerate() {
            let seed = trial_seed(cfg.seed, format, g + 1, 0);
            let symbols = receive(cfg, format, n, osnr, None, seed)?;
            let mfi = mfi.clone().with_seed(derive_seed(seed, &[3]));
            let kb = extract_key_blocks(&symbols, &mfi)?;
            let (stage2, _) = median_time(cx.warmup, cx.reps, || {
                Ok(classify_key_blocks(kb.clone(), &mfi)?)
            })?;
            let (dbscan, _) = median_time(cx.warmup, cx.reps, || {
                Ok(dbscan_mfi(&symbols, &mfi.bps, &params, &mfi.table)?)
            })?;
            scaling.push(ScalingRow {
                format,
                n_symbols: n,
                key_blocks: kb.len(),
                stage2_s: stage2.as_secs_f64(),
                dbscan_s: dbscan.as_secs_f64(),
            });
        }
    }

    let mut summary = Vec::new();
    for &format in &cfg.formats {
        let rows: Vec<&ComplexityTrialRow> = trials.iter().filter(|r| r.format == format).collect();
        let mean = |f: fn(&ComplexityTrialRow) -> f64| {
            rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64
        };
        for (method, value) in [
            (METHOD_PROPOSED, mean(|r| r.proposed_s)),
            (METHOD_DBSCAN, mean(|r| r.dbscan_s)),
        ] {
            summary.push(ComplexitySummaryRow {
                format,
                method,
                mean_runtime_s: value,
                relative_runtime: 0.0,
            });
        }
    }
    let slowest = summary.iter().map(|r| r.mean_runtime_s).fold(0.0, f64::max);
    for r in &mut summary {
        r.relative_runtime = if slowest > 0.0 {
            r.mean_runtime_s / slowest
        } else {
            1.0
        };
    }
    Ok(ComplexityReport {
        summary,
        trials,
        scaling,
    })
}

/// Serializes rows as CSV with a header line.
pub fn write_csv<R: Serialize>(rows: &[R], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}
