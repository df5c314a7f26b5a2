//! Multi-threshold ECT loss between a grayscale prediction and its ground
//! truth, plus the soft-DICE term it is combined with.
//!
//! Both volumes are binarized at `n` thresholds picked at equal index steps
//! through the sorted distinct values of the pair. At each threshold the two
//! binary images are compared through their sampled Euler characteristic
//! transforms over one shared direction set. The loss carries no gradient: it
//! is piecewise constant in the voxel values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubical::LowerStarWeights;
use crate::ect::{
    ect_distance_sq, ect_distance_sq_index_aligned, ect_from_weights, sample_directions,
    DirectionMode, DirectionSet, EctMatrix, EulerCurve, RangeMode,
};
use crate::error::{Error, Result};
use crate::volume::{binarize, sorted_distinct_union, BinaryVolume, GrayVolume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    /// Number of thresholds `n`.
    pub thresholds: usize,
    /// Number of directions `l`.
    pub directions: usize,
    /// Curve step count `M`; each curve has `M + 1` samples.
    pub steps: usize,
    pub seed: u64,
    pub direction_mode: DirectionMode,
    pub range_mode: RangeMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            thresholds: 40,
            directions: 100,
            steps: 30,
            seed: 0,
            direction_mode: DirectionMode::Random,
            range_mode: RangeMode::Grid,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        for (name, value) in [
            ("thresholds", self.thresholds),
            ("directions", self.directions),
            ("steps", self.steps),
        ] {
            if value == 0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be at least 1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdTerm {
    pub tau: f32,
    pub distance_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopoLoss {
    /// Sum of the per-threshold squared distances divided by `n`.
    pub topo: f64,
    pub per_threshold: Vec<ThresholdTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub topo: f64,
    pub dice: f64,
    /// `dice + lambda * topo`.
    pub total: f64,
    pub per_threshold: Vec<ThresholdTerm>,
}

/// Thresholds `R[⌈k·m/n⌉]` for `k = 1..=n` (1-based, clamped to `1..=m`),
/// where `R` is the sorted distinct union of both volumes' values and `m` its
/// length. The last threshold is always the largest value.
pub fn select_thresholds(pred: &GrayVolume, gt: &GrayVolume, n: usize) -> Result<Vec<f32>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "threshold count must be at least 1".into(),
        ));
    }
    let r = sorted_distinct_union(pred, gt)?;
    let m = r.len();
    Ok((1..=n)
        .map(|k| {
            let idx = (k * m).div_ceil(n).clamp(1, m);
            r[idx - 1]
        })
        .collect())
}

/// Consecutive runs of identical binarizations collapse to one image;
/// thresholds are non-decreasing so equal images are always adjacent.
fn unique_binarizations(v: &GrayVolume, taus: &[f32]) -> (Vec<BinaryVolume>, Vec<usize>) {
    let mut images: Vec<BinaryVolume> = Vec::new();
    let mut index = Vec::with_capacity(taus.len());
    for &tau in taus {
        let b = binarize(v, tau);
        if images.last() != Some(&b) {
            images.push(b);
        }
        index.push(images.len() - 1);
    }
    (images, index)
}

fn transform(b: &BinaryVolume, dirs: &DirectionSet, cfg: &LossConfig) -> Result<EctMatrix> {
    if cfg.range_mode == RangeMode::Complex && !b.has_foreground() {
        // No vertices, no range: an all-zero curve over a degenerate range.
        let curve = EulerCurve {
            h_min: 0.0,
            h_max: 0.0,
            dh: 0.0,
            samples: vec![0; cfg.steps + 1],
        };
        return Ok(EctMatrix {
            directions: dirs.directions.clone(),
            curves: vec![curve; dirs.len()],
        });
    }
    let weights = LowerStarWeights::new(b);
    ect_from_weights(&weights, b, dirs, cfg.steps, cfg.range_mode)
}

/// Topological term and its per-threshold breakdown.
pub fn topo_loss(pred: &GrayVolume, gt: &GrayVolume, cfg: &LossConfig) -> Result<TopoLoss> {
    cfg.validate()?;
    let taus = select_thresholds(pred, gt, cfg.thresholds)?;
    let dirs = sample_directions(cfg.directions, cfg.seed, cfg.direction_mode)?;

    let (pred_images, pred_idx) = unique_binarizations(pred, &taus);
    let (gt_images, gt_idx) = unique_binarizations(gt, &taus);

    // Only images compared against a different image need a transform.
    let mut need_pred = vec![false; pred_images.len()];
    let mut need_gt = vec![false; gt_images.len()];
    for (&i, &j) in pred_idx.iter().zip(&gt_idx) {
        if pred_images[i] != gt_images[j] {
            need_pred[i] = true;
            need_gt[j] = true;
        }
    }
    let jobs: Vec<&BinaryVolume> = pred_images.iter().chain(&gt_images).collect();
    let needed: Vec<bool> = need_pred.iter().chain(&need_gt).copied().collect();
    let matrices = jobs
        .par_iter()
        .zip(needed.par_iter())
        .map(|(b, &need)| need.then(|| transform(b, &dirs, cfg)).transpose())
        .collect::<Result<Vec<Option<EctMatrix>>>>()?;
    let (pred_ect, gt_ect) = matrices.split_at(pred_images.len());

    let mut per_threshold = Vec::with_capacity(taus.len());
    for (k, &tau) in taus.iter().enumerate() {
        let (i, j) = (pred_idx[k], gt_idx[k]);
        let distance_sq = match (&pred_ect[i], &gt_ect[j]) {
            (Some(a), Some(b)) => match cfg.range_mode {
                RangeMode::Grid => ect_distance_sq(a, b)?,
                RangeMode::Complex => ect_distance_sq_index_aligned(a, b)?,
            },
            // Identical binary images.
            _ => 0.0,
        };
        per_threshold.push(ThresholdTerm { tau, distance_sq });
    }
    let sum: f64 = per_threshold.iter().map(|t| t.distance_sq).sum();
    Ok(TopoLoss {
        topo: sum / cfg.thresholds as f64,
        per_threshold,
    })
}

pub const DICE_EPSILON: f64 = 1e-6;

fn check_unit_interval(v: &GrayVolume) -> Result<()> {
    match v.values().iter().position(|&x| !(0.0..=1.0).contains(&x)) {
        Some(index) => Err(Error::ValueOutOfRange {
            index,
            value: v.values()[index],
        }),
        None => Ok(()),
    }
}

/// Soft DICE loss `1 - (2·Σpg + ε) / (Σp + Σg + ε)` with `ε = 1e-6`.
pub fn dice_loss(pred: &GrayVolume, gt: &GrayVolume) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch(pred.shape(), gt.shape()));
    }
    check_unit_interval(pred)?;
    check_unit_interval(gt)?;
    let (mut inter, mut sp, mut sg) = (0f64, 0f64, 0f64);
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        let (p, g) = (p as f64, g as f64);
        inter += p * g;
        sp += p;
        sg += g;
    }
    Ok(1.0 - (2.0 * inter + DICE_EPSILON) / (sp + sg + DICE_EPSILON))
}

/// DICE plus `lambda` times the topological term.
pub fn total_loss(pred: &GrayVolume, gt: &GrayVolume, cfg: &LossConfig) -> Result<LossReport> {
    let dice = dice_loss(pred, gt)?;
    let TopoLoss {
        topo,
        per_threshold,
    } = topo_loss(pred, gt, cfg)?;
    Ok(LossReport {
        topo,
        dice,
        total: dice + cfg.lambda * topo,
        per_threshold,
    })
}
