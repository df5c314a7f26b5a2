//! Brute-force oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ect::rng::SplitMix64;
use ect::volume::{save_volume, BinaryVolume, GrayVolume, Shape, Volume};
use proptest::prelude::*;

/// A candidate cube: anchor voxel and axis subset.
#[derive(Debug, Clone, Copy)]
pub struct OracleCube {
    pub anchor: [usize; 3],
    pub axes: [bool; 3],
}

impl OracleCube {
    pub fn dim(&self) -> usize {
        self.axes.iter().filter(|&&a| a).count()
    }

    pub fn vertices(&self) -> Vec<[usize; 3]> {
        let mut out = vec![self.anchor];
        for a in 0..3 {
            if self.axes[a] {
                let more: Vec<_> = out
                    .iter()
                    .map(|v| {
                        let mut w = *v;
                        w[a] += 1;
                        w
                    })
                    .collect();
                out.extend(more);
            }
        }
        out
    }
}

/// Every (anchor, axes) pair whose 2^dim voxels all lie in the grid and are
/// foreground.
pub fn oracle_cubes(b: &BinaryVolume) -> Vec<OracleCube> {
    let s = b.shape();
    let mut cubes = Vec::new();
    for x in 0..s[0] {
        for y in 0..s[1] {
            for z in 0..s[2] {
                for mask in 0..8u8 {
                    let cube = OracleCube {
                        anchor: [x, y, z],
                        axes: [mask & 1 != 0, mask & 2 != 0, mask & 4 != 0],
                    };
                    let ok = cube
                        .vertices()
                        .iter()
                        .all(|&v| (0..3).all(|a| v[a] < s[a]) && b.get(v));
                    if ok {
                        cubes.push(cube);
                    }
                }
            }
        }
    }
    cubes
}

pub fn oracle_counts(b: &BinaryVolume) -> [u64; 4] {
    let mut counts = [0u64; 4];
    for c in oracle_cubes(b) {
        counts[c.dim()] += 1;
    }
    counts
}

pub fn oracle_chi(b: &BinaryVolume) -> i64 {
    let c = oracle_counts(b);
    c[0] as i64 - c[1] as i64 + c[2] as i64 - c[3] as i64
}

pub fn height(v: [usize; 3], u: [f64; 3]) -> f64 {
    u[0] * v[0] as f64 + u[1] * v[1] as f64 + u[2] * v[2] as f64
}

/// Entry height of each cube: the highest of its vertices.
pub fn entry_heights(b: &BinaryVolume, u: [f64; 3]) -> Vec<(f64, i64)> {
    oracle_cubes(b)
        .iter()
        .map(|c| {
            let h = c
                .vertices()
                .iter()
                .map(|&v| height(v, u))
                .fold(f64::NEG_INFINITY, f64::max);
            (h, if c.dim() % 2 == 0 { 1 } else { -1 })
        })
        .collect()
}

/// Sample heights `h_min + j·dh` with the last one pinned to `h_max`.
pub fn oracle_sample_heights(h_min: f64, h_max: f64, steps: usize) -> Vec<f64> {
    let dh = (h_max - h_min) / steps as f64;
    (0..=steps)
        .map(|j| {
            if j == steps {
                h_max
            } else {
                (h_min + j as f64 * dh).min(h_max)
            }
        })
        .collect()
}

/// Height range over all grid vertices (`grid`) or foreground vertices
/// (`complex`).
pub fn oracle_range(b: &BinaryVolume, u: [f64; 3], grid: bool) -> (f64, f64) {
    let s = b.shape();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in 0..s[0] {
        for y in 0..s[1] {
            for z in 0..s[2] {
                if grid || b.get([x, y, z]) {
                    let h = height([x, y, z], u);
                    lo = lo.min(h);
                    hi = hi.max(h);
                }
            }
        }
    }
    (lo, hi)
}

/// Per sample height, the alternating count of cubes whose entry height is
/// at most that height.
pub fn oracle_curve(b: &BinaryVolume, u: [f64; 3], steps: usize, grid: bool) -> Vec<i64> {
    let (lo, hi) = oracle_range(b, u, grid);
    let entries = entry_heights(b, u);
    if hi <= lo {
        let chi: i64 = entries.iter().map(|e| e.1).sum();
        return vec![chi; steps + 1];
    }
    oracle_sample_heights(lo, hi, steps)
        .iter()
        .map(|&h| entries.iter().filter(|e| e.0 <= h).map(|e| e.1).sum())
        .collect()
}

/// True if some entry height lies within `tol` of `h`.
pub fn near_entry(entries: &[(f64, i64)], h: f64, tol: f64) -> bool {
    entries.iter().any(|e| (e.0 - h).abs() <= tol)
}

pub fn shape_strategy(max: usize) -> impl Strategy<Value = Shape> {
    (1..=max, 1..=max, 1..=max).prop_map(|(x, y, z)| [x, y, z])
}

/// Binary volumes up to `max` per axis with a random fill density.
pub fn binary_strategy(max: usize) -> impl Strategy<Value = BinaryVolume> {
    (shape_strategy(max), 0u32..=100).prop_flat_map(|(s, fill)| {
        let n = s.iter().product::<usize>();
        prop::collection::vec(0u32..100, n).prop_map(move |r| {
            BinaryVolume::new(s, r.into_iter().map(|x| x < fill).collect()).unwrap()
        })
    })
}

/// Binary volumes of one fixed shape.
pub fn binary_of_shape(s: Shape) -> impl Strategy<Value = BinaryVolume> {
    let n = s.iter().product::<usize>();
    prop::collection::vec(any::<bool>(), n).prop_map(move |b| BinaryVolume::new(s, b).unwrap())
}

/// Grayscale volumes whose values come from a small palette, so ties occur.
pub fn gray_of_shape(s: Shape) -> impl Strategy<Value = GrayVolume> {
    let n = s.iter().product::<usize>();
    prop::collection::vec(0u8..=10, n).prop_map(move |v| {
        GrayVolume::new(s, v.into_iter().map(|x| x as f32 / 10.0).collect()).unwrap()
    })
}

pub fn unit_direction() -> impl Strategy<Value = [f64; 3]> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
        .prop_map(|(x, y, z)| {
            let n = (x * x + y * y + z * z).sqrt();
            [x / n, y / n, z / n]
        })
}

pub fn random_binary(shape: Shape, fill: f64, rng: &mut SplitMix64) -> BinaryVolume {
    BinaryVolume::from_fn(shape, |_| rng.bernoulli(fill)).unwrap()
}

pub fn random_gray(shape: Shape, rng: &mut SplitMix64) -> GrayVolume {
    GrayVolume::from_fn(shape, |_| rng.next_f64() as f32).unwrap()
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
}

pub fn write_vgrid(dir: &Path, name: &str, v: impl Into<Volume>) -> PathBuf {
    let path = dir.join(name);
    save_volume(&v.into(), &path).unwrap();
    path
}
