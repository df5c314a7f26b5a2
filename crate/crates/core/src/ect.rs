//! Height filtrations, Euler characteristic curves and the sampled Euler
//! characteristic transform.
//!
//! A cube enters the height filtration along `u` at the largest height of its
//! vertices. Curves are built by adding each cube's `(-1)^dim` into the first
//! sample whose height reaches the cube's entry height and taking a prefix
//! sum. Cubes sharing a highest vertex are pre-aggregated by
//! [`LowerStarWeights`], so a curve costs one pass over the weighted vertices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubical::LowerStarWeights;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::volume::{BinaryVolume, Coord, Shape};

pub type Direction = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMode {
    /// Gaussian samples normalised onto the sphere.
    Random,
    /// Deterministic spherical Fibonacci lattice.
    Fibonacci,
}

/// Where the sampled heights of a curve come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RangeMode {
    /// Extremes over the corner voxels of the grid; identical for every
    /// volume of the same shape, so curves of different volumes line up.
    Grid,
    /// Extremes over the foreground voxels of the volume itself.
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionSet {
    pub directions: Vec<Direction>,
    pub seed: Option<u64>,
    pub mode: DirectionMode,
}

impl DirectionSet {
    /// Wraps explicit directions, normalising each one.
    pub fn from_vectors(vectors: &[Direction]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidParameter(
                "direction set must be non-empty".into(),
            ));
        }
        let directions = vectors
            .iter()
            .map(|&v| normalize(v))
            .collect::<Result<_>>()?;
        Ok(Self {
            directions,
            seed: None,
            mode: DirectionMode::Random,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Direction> {
        self.directions.iter()
    }
}

/// Scales a non-zero vector to unit length.
pub fn normalize(v: Direction) -> Result<Direction> {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::InvalidDirection(format!(
            "{v:?} cannot be normalised"
        )));
    }
    Ok([v[0] / norm, v[1] / norm, v[2] / norm])
}

/// `l` unit vectors on the sphere.
///
/// Random mode draws three standard normals per vector from a SplitMix64
/// stream (Box-Muller) and normalises; draws shorter than 1e-12 are rejected.
/// Fibonacci mode ignores the seed.
pub fn sample_directions(l: usize, seed: u64, mode: DirectionMode) -> Result<DirectionSet> {
    if l == 0 {
        return Err(Error::InvalidParameter(
            "direction count must be at least 1".into(),
        ));
    }
    let directions = match mode {
        DirectionMode::Random => {
            let mut rng = SplitMix64::new(seed);
            (0..l)
                .map(|_| loop {
                    let v = [rng.next_normal(), rng.next_normal(), rng.next_normal()];
                    let norm2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                    if norm2 > 1e-24 {
                        break normalize(v).expect("non-zero vector");
                    }
                })
                .collect()
        }
        DirectionMode::Fibonacci => {
            let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..l)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / l as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden_angle * i as f64;
                    normalize([r * phi.cos(), r * phi.sin(), z]).expect("unit lattice point")
                })
                .collect()
        }
    };
    Ok(DirectionSet {
        directions,
        seed: match mode {
            DirectionMode::Random => Some(seed),
            DirectionMode::Fibonacci => None,
        },
        mode,
    })
}

/// Height `u · v` of a lattice vertex.
///
/// The evaluation order is fixed, which makes the result monotone in each
/// coordinate; range extremes and cube entry heights rely on that.
#[inline]
pub fn vertex_height(v: Coord, u: Direction) -> f64 {
    u[0] * v[0] as f64 + u[1] * v[1] as f64 + u[2] * v[2] as f64
}

#[inline]
fn vertex_height_u32(v: [u32; 3], u: Direction) -> f64 {
    u[0] * v[0] as f64 + u[1] * v[1] as f64 + u[2] * v[2] as f64
}

/// Lowest and highest vertex heights over the grid's corners.
pub fn grid_height_range(shape: Shape, u: Direction) -> (f64, f64) {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        if u[a] >= 0.0 {
            hi[a] = shape[a] - 1;
        } else {
            lo[a] = shape[a] - 1;
        }
    }
    (vertex_height(lo, u), vertex_height(hi, u))
}

fn foreground_height_range(b: &BinaryVolume, u: Direction) -> Result<(f64, f64)> {
    b.foreground()
        .map(|v| vertex_height(v, u))
        .fold(None, |acc: Option<(f64, f64)>, h| match acc {
            None => Some((h, h)),
            Some((lo, hi)) => Some((lo.min(h), hi.max(h))),
        })
        .ok_or(Error::EmptyVolume)
}

/// Euler characteristic of the sublevel complexes at `M + 1` equally spaced
/// heights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerCurve {
    pub h_min: f64,
    pub h_max: f64,
    /// `(h_max - h_min) / M`.
    pub dh: f64,
    pub samples: Vec<i64>,
}

impl EulerCurve {
    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    /// Height of sample `j`: `h_min + j * dh`, except that the last sample
    /// sits exactly on `h_max`.
    pub fn sample_height(&self, j: usize) -> f64 {
        sample_height(self.h_min, self.h_max, self.dh, self.steps(), j)
    }

    pub fn heights(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|j| self.sample_height(j))
    }
}

#[inline]
fn sample_height(h_min: f64, h_max: f64, dh: f64, steps: usize, j: usize) -> f64 {
    if j >= steps {
        h_max
    } else {
        (h_min + j as f64 * dh).min(h_max)
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "step count M must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Euler curve of `b` along `u` with `steps + 1` samples.
pub fn euler_curve(
    b: &BinaryVolume,
    u: Direction,
    steps: usize,
    range: RangeMode,
) -> Result<EulerCurve> {
    check_steps(steps)?;
    let weights = LowerStarWeights::new(b);
    curve_from_weights(&weights, b, u, steps, range)
}

fn curve_from_weights(
    weights: &LowerStarWeights,
    b: &BinaryVolume,
    u: Direction,
    steps: usize,
    range: RangeMode,
) -> Result<EulerCurve> {
    let (h_min, h_max) = match range {
        RangeMode::Grid => grid_height_range(b.shape(), u),
        RangeMode::Complex => foreground_height_range(b, u)?,
    };
    let dh = (h_max - h_min) / steps as f64;
    let heights: Vec<f64> = (0..=steps)
        .map(|j| sample_height(h_min, h_max, dh, steps, j))
        .collect();

    let mut samples = vec![0i64; steps + 1];
    if dh > 0.0 {
        let inv_dh = 1.0 / dh;
        for &(v, w) in weights.for_direction(u) {
            let e = vertex_height_u32(v, u);
            // Estimate the bin, then settle it against the exact sample
            // heights: first j with e <= heights[j].
            let mut j = ((e - h_min) * inv_dh).ceil().clamp(0.0, steps as f64) as usize;
            while j > 0 && e <= heights[j - 1] {
                j -= 1;
            }
            while j <= steps && e > heights[j] {
                j += 1;
            }
            if j <= steps {
                samples[j] += w as i64;
            }
        }
        let mut acc = 0;
        for s in samples.iter_mut() {
            acc += *s;
            *s = acc;
        }
    } else {
        // All relevant heights coincide: every cube is present at every sample.
        samples.fill(weights.euler_characteristic());
    }
    Ok(EulerCurve {
        h_min,
        h_max,
        dh,
        samples,
    })
}

/// Sampled transform: one Euler curve per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct EctMatrix {
    pub directions: Vec<Direction>,
    pub curves: Vec<EulerCurve>,
}

impl EctMatrix {
    pub fn steps(&self) -> usize {
        self.curves.first().map_or(0, EulerCurve::steps)
    }

    pub fn rows(&self) -> usize {
        self.curves.len()
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.curves[i].samples
    }
}

impl Serialize for EctMatrix {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            directions: &'a [Direction],
            steps: usize,
            h_range: Vec<[f64; 2]>,
            curves: Vec<&'a [i64]>,
        }
        View {
            directions: &self.directions,
            steps: self.steps(),
            h_range: self.curves.iter().map(|c| [c.h_min, c.h_max]).collect(),
            curves: self.curves.iter().map(|c| c.samples.as_slice()).collect(),
        }
        .serialize(serializer)
    }
}

/// Transform of `b` over `dirs`. Rows are computed in parallel and stored in
/// direction order.
pub fn compute_ect(
    b: &BinaryVolume,
    dirs: &DirectionSet,
    steps: usize,
    range: RangeMode,
) -> Result<EctMatrix> {
    check_steps(steps)?;
    let weights = LowerStarWeights::new(b);
    ect_from_weights(&weights, b, dirs, steps, range)
}

pub(crate) fn ect_from_weights(
    weights: &LowerStarWeights,
    b: &BinaryVolume,
    dirs: &DirectionSet,
    steps: usize,
    range: RangeMode,
) -> Result<EctMatrix> {
    if dirs.is_empty() {
        return Err(Error::InvalidParameter(
            "direction set must be non-empty".into(),
        ));
    }
    let curves = dirs
        .directions
        .par_iter()
        .map(|&u| curve_from_weights(weights, b, u, steps, range))
        .collect::<Result<Vec<_>>>()?;
    Ok(EctMatrix {
        directions: dirs.directions.clone(),
        curves,
    })
}

fn check_same_directions(a: &EctMatrix, b: &EctMatrix) -> Result<()> {
    if a.directions != b.directions {
        return Err(Error::IncompatibleEct("direction sets differ".into()));
    }
    if a.curves.len() != b.curves.len() || a.steps() != b.steps() {
        return Err(Error::IncompatibleEct("curve shapes differ".into()));
    }
    Ok(())
}

/// Integration weight of one sample; degenerate (zero-length) ranges spread
/// unit mass over the samples.
#[inline]
fn sample_weight(curve: &EulerCurve) -> f64 {
    if curve.dh > 0.0 {
        curve.dh
    } else {
        1.0 / curve.samples.len() as f64
    }
}

fn row_distance_sq(a: &EulerCurve, b: &EulerCurve, weight: f64) -> f64 {
    let sum: i64 = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    sum as f64 * weight
}

/// Monte Carlo estimate of the squared transform distance: the mean over
/// directions of `Σ_j (A[i,j] - B[i,j])² · dh`.
///
/// Both matrices must share directions, step count and per-row height range.
pub fn ect_distance_sq(a: &EctMatrix, b: &EctMatrix) -> Result<f64> {
    check_same_directions(a, b)?;
    let mut total = 0.0;
    for (ca, cb) in a.curves.iter().zip(&b.curves) {
        if ca.h_min != cb.h_min || ca.h_max != cb.h_max {
            return Err(Error::IncompatibleEct(
                "height ranges differ; use the grid range mode".into(),
            ));
        }
        total += row_distance_sq(ca, cb, sample_weight(ca));
    }
    Ok(total / a.curves.len() as f64)
}

/// Square root of [`ect_distance_sq`].
pub fn ect_distance(a: &EctMatrix, b: &EctMatrix) -> Result<f64> {
    ect_distance_sq(a, b).map(f64::sqrt)
}

/// Index-aligned variant for curves whose height ranges differ (per-volume
/// ranges): samples are compared position by position and each row is
/// weighted by the mean of the two step lengths.
pub fn ect_distance_sq_index_aligned(a: &EctMatrix, b: &EctMatrix) -> Result<f64> {
    check_same_directions(a, b)?;
    let total: f64 = a
        .curves
        .iter()
        .zip(&b.curves)
        .map(|(ca, cb)| row_distance_sq(ca, cb, 0.5 * (sample_weight(ca) + sample_weight(cb))))
        .sum();
    Ok(total / a.curves.len() as f64)
}
