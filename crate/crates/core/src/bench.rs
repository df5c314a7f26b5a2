//! Phase timings of the loss pipeline on synthetic volumes.

use std::time::Instant;

use serde::Serialize;

use crate::cubical::LowerStarWeights;
use crate::ect::{ect_distance_sq, ect_from_weights, sample_directions, DirectionSet};
use crate::error::Result;
use crate::fixtures::synthetic_pair;
use crate::loss::LossConfig;
use crate::volume::{binarize, Shape};

pub const MIN_RUNS: usize = 5;

/// Median wall time in seconds of each phase for one grid size.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseTimings {
    pub shape: Shape,
    pub runs: usize,
    pub binarize: f64,
    pub cell_scan: f64,
    pub curve: f64,
    pub distance: f64,
    /// `binarize + cell_scan + curve + distance`.
    pub total: f64,
    /// Cell scan plus curves with `l` directions.
    pub transform: f64,
    /// The same with `2l` directions.
    pub transform_double_directions: f64,
    pub transform_scaling: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub sizes: Vec<PhaseTimings>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn seconds<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn time_transform(
    b: &crate::volume::BinaryVolume,
    dirs: &DirectionSet,
    cfg: &LossConfig,
) -> Result<f64> {
    let start = Instant::now();
    let w = LowerStarWeights::new(b);
    ect_from_weights(&w, b, dirs, cfg.steps, cfg.range_mode)?;
    Ok(start.elapsed().as_secs_f64())
}

/// Times one threshold of the loss (binarize both volumes at 0.5, scan
/// cells, build curves, compare) per grid shape, `runs` times each.
pub fn bench(sizes: &[Shape], cfg: &LossConfig, runs: usize) -> Result<BenchReport> {
    cfg.validate()?;
    let runs = runs.max(MIN_RUNS);
    let dirs = sample_directions(cfg.directions, cfg.seed, cfg.direction_mode)?;
    let dirs2 = sample_directions(2 * cfg.directions, cfg.seed, cfg.direction_mode)?;
    let mut out = Vec::with_capacity(sizes.len());
    for &shape in sizes {
        let (pred, gt) = synthetic_pair(shape, cfg.seed)?;
        let gt = gt.to_gray();
        let mut phases: [Vec<f64>; 4] = Default::default();
        let (mut t1, mut t2) = (Vec::new(), Vec::new());
        for _ in 0..runs {
            let ((a, b), tb) = seconds(|| (binarize(&pred, 0.5), binarize(&gt, 0.5)));
            let ((wa, wb), tc) = seconds(|| (LowerStarWeights::new(&a), LowerStarWeights::new(&b)));
            let (curves, tv) = seconds(|| -> Result<_> {
                Ok((
                    ect_from_weights(&wa, &a, &dirs, cfg.steps, cfg.range_mode)?,
                    ect_from_weights(&wb, &b, &dirs, cfg.steps, cfg.range_mode)?,
                ))
            });
            let (ea, eb) = curves?;
            let (d, td) = seconds(|| ect_distance_sq(&ea, &eb));
            d?;
            for (p, t) in phases.iter_mut().zip([tb, tc, tv, td]) {
                p.push(t);
            }
            t1.push(time_transform(&a, &dirs, cfg)?);
            t2.push(time_transform(&a, &dirs2, cfg)?);
        }
        let [binarize_t, cell_scan, curve, distance] = phases.map(median);
        let transform = median(t1);
        let transform_double_directions = median(t2);
        out.push(PhaseTimings {
            shape,
            runs,
            binarize: binarize_t,
            cell_scan,
            curve,
            distance,
            total: binarize_t + cell_scan + curve + distance,
            transform,
            transform_double_directions,
            transform_scaling: transform_double_directions / transform,
        });
    }
    Ok(BenchReport { sizes: out })
}
