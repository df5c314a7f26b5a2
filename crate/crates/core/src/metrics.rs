//! Reconstruction error metrics against a binary ground truth.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::volume::{binarize, otsu_threshold, BinaryVolume, GrayVolume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub iou_error: f64,
    pub volume_error: f64,
    pub surface_error: f64,
    pub otsu_threshold_used: f32,
}

fn same_shape(a: &BinaryVolume, b: &BinaryVolume) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(a.shape(), b.shape()));
    }
    Ok(())
}

/// `1 - |pred ∧ gt| / |pred ∨ gt|`.
pub fn iou_error(pred: &BinaryVolume, gt: &BinaryVolume) -> Result<f64> {
    same_shape(pred, gt)?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        inter += (p && g) as u64;
        union += (p || g) as u64;
    }
    if union == 0 {
        return Err(Error::UndefinedMetric("IoU of two empty masks".into()));
    }
    Ok(1.0 - inter as f64 / union as f64)
}

fn relative_count_error(pred: u64, gt: u64, what: &str) -> Result<f64> {
    if gt == 0 {
        return Err(Error::UndefinedMetric(format!(
            "{what} error against an empty ground truth"
        )));
    }
    Ok(pred.abs_diff(gt) as f64 / gt as f64)
}

/// `|V_pred - V_gt| / V_gt` over foreground voxel counts.
pub fn volume_error(pred: &BinaryVolume, gt: &BinaryVolume) -> Result<f64> {
    same_shape(pred, gt)?;
    relative_count_error(
        pred.foreground_count() as u64,
        gt.foreground_count() as u64,
        "volume",
    )
}

/// Foreground voxels with at least one background 6-neighbour; voxels on the
/// grid boundary count as surface.
pub fn surface_voxel_count(b: &BinaryVolume) -> u64 {
    const NEIGHBOURS: [[isize; 3]; 6] = [
        [-1, 0, 0],
        [1, 0, 0],
        [0, -1, 0],
        [0, 1, 0],
        [0, 0, -1],
        [0, 0, 1],
    ];
    b.foreground()
        .filter(|v| {
            NEIGHBOURS.iter().any(|d| {
                let p = [
                    v[0] as isize + d[0],
                    v[1] as isize + d[1],
                    v[2] as isize + d[2],
                ];
                !b.get_signed(p)
            })
        })
        .count() as u64
}

/// `|S_pred - S_gt| / S_gt` over surface voxel counts.
pub fn surface_error(pred: &BinaryVolume, gt: &BinaryVolume) -> Result<f64> {
    same_shape(pred, gt)?;
    relative_count_error(
        surface_voxel_count(pred),
        surface_voxel_count(gt),
        "surface",
    )
}

/// Binarizes `pred` at its Otsu threshold and scores it against `gt`.
pub fn evaluate(pred: &GrayVolume, gt: &BinaryVolume) -> Result<MetricsReport> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch(pred.shape(), gt.shape()));
    }
    let tau = otsu_threshold(pred);
    let mask = binarize(pred, tau);
    Ok(MetricsReport {
        iou_error: iou_error(&mask, gt)?,
        volume_error: volume_error(&mask, gt)?,
        surface_error: surface_error(&mask, gt)?,
        otsu_threshold_used: tau,
    })
}
