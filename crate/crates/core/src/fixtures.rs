//! Deterministic synthetic volumes for benchmarks, examples and tests.

use crate::error::Result;
use crate::rng::SplitMix64;
use crate::volume::{BinaryVolume, GrayVolume, Shape};

/// A ground-truth ellipsoid and a noisy soft prediction of it.
///
/// The prediction is `0.7` inside a slightly shifted copy of the ellipsoid,
/// `0.15` outside, plus uniform noise in `[-0.15, 0.15]`, clamped to `[0, 1]`.
pub fn synthetic_pair(shape: Shape, seed: u64) -> Result<(GrayVolume, BinaryVolume)> {
    let centre = shape.map(|n| (n as f64 - 1.0) / 2.0);
    let radii = shape.map(|n| (n as f64 / 3.0).max(0.75));
    let inside = |c: [usize; 3], shift: f64| {
        (0..3)
            .map(|a| {
                let t = (c[a] as f64 - centre[a] - if a == 0 { shift } else { 0.0 }) / radii[a];
                t * t
            })
            .sum::<f64>()
            <= 1.0
    };
    let gt = BinaryVolume::from_fn(shape, |c| inside(c, 0.0))?;
    let mut rng = SplitMix64::new(seed);
    let shift = 0.1 * shape[0] as f64;
    let pred = GrayVolume::from_fn(shape, |c| {
        let base = if inside(c, shift) { 0.7 } else { 0.15 };
        let noise = 0.3 * (rng.next_f64() - 0.5);
        (base + noise).clamp(0.0, 1.0) as f32
    })?;
    Ok((pred, gt))
}
