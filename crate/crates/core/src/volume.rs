//! Dense voxel grids, VGRID file I/O, thresholding and Otsu binarization.
//!
//! Voxels are stored row-major with x slowest: the voxel at `(x, y, z)` lives
//! at index `(x * ny + y) * nz + z`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid extents `(nx, ny, nz)`.
pub type Shape = [usize; 3];

/// Integer lattice coordinate of a voxel.
pub type Coord = [usize; 3];

fn check_shape(shape: Shape) -> Result<usize> {
    if shape.contains(&0) {
        return Err(Error::InvalidShape(shape));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or(Error::InvalidShape(shape))
}

#[inline]
pub fn linear_index(shape: Shape, [x, y, z]: Coord) -> usize {
    (x * shape[1] + y) * shape[2] + z
}

#[inline]
pub fn coord_of(shape: Shape, index: usize) -> Coord {
    let z = index % shape[2];
    let rest = index / shape[2];
    [rest / shape[1], rest % shape[1], z]
}

/// Scalar voxel grid, e.g. a network prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayVolume {
    shape: Shape,
    values: Vec<f32>,
}

impl GrayVolume {
    pub fn new(shape: Shape, values: Vec<f32>) -> Result<Self> {
        let len = check_shape(shape)?;
        if values.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { shape, values })
    }

    pub fn filled(shape: Shape, value: f32) -> Result<Self> {
        let len = check_shape(shape)?;
        Self::new(shape, vec![value; len])
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(Coord) -> f32) -> Result<Self> {
        let len = check_shape(shape)?;
        let values = (0..len).map(|i| f(coord_of(shape, i))).collect();
        Self::new(shape, values)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, c: Coord) -> f32 {
        self.values[linear_index(self.shape, c)]
    }

    /// Smallest and largest value.
    pub fn min_max(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Binary view of a {0, 1}-valued volume.
    pub fn to_binary(&self) -> Result<BinaryVolume> {
        let bits = self
            .values
            .iter()
            .map(|&v| match v {
                0.0 => Ok(false),
                1.0 => Ok(true),
                _ => Err(Error::NotBinary),
            })
            .collect::<Result<Vec<_>>>()?;
        BinaryVolume::new(self.shape, bits)
    }
}

/// Boolean voxel grid. Foreground voxels are the vertices of the cubical
/// complex built in [`crate::cubical`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryVolume {
    shape: Shape,
    bits: Vec<bool>,
}

impl BinaryVolume {
    pub fn new(shape: Shape, bits: Vec<bool>) -> Result<Self> {
        let len = check_shape(shape)?;
        if bits.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: bits.len(),
            });
        }
        Ok(Self { shape, bits })
    }

    pub fn empty(shape: Shape) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape,
            bits: vec![false; len],
        })
    }

    pub fn full(shape: Shape) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape,
            bits: vec![true; len],
        })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(Coord) -> bool) -> Result<Self> {
        let len = check_shape(shape)?;
        let bits = (0..len).map(|i| f(coord_of(shape, i))).collect();
        Ok(Self { shape, bits })
    }

    /// Builds a volume with the listed voxels set.
    pub fn from_coords(shape: Shape, coords: &[Coord]) -> Result<Self> {
        let mut v = Self::empty(shape)?;
        for &c in coords {
            v.set(c, true)?;
        }
        Ok(v)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, [x, y, z]: Coord) -> bool {
        x < self.shape[0] && y < self.shape[1] && z < self.shape[2]
    }

    #[inline]
    pub fn get(&self, c: Coord) -> bool {
        self.bits[linear_index(self.shape, c)]
    }

    /// Like [`get`](Self::get) but out-of-grid coordinates (including
    /// negative ones) read as background.
    #[inline]
    pub fn get_signed(&self, [x, y, z]: [isize; 3]) -> bool {
        if x < 0 || y < 0 || z < 0 {
            return false;
        }
        let c = [x as usize, y as usize, z as usize];
        self.contains(c) && self.get(c)
    }

    pub fn set(&mut self, c: Coord, value: bool) -> Result<()> {
        if !self.contains(c) {
            return Err(Error::OutOfBounds(c));
        }
        let i = linear_index(self.shape, c);
        self.bits[i] = value;
        Ok(())
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn has_foreground(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }

    pub fn foreground(&self) -> impl Iterator<Item = Coord> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| coord_of(self.shape, i))
    }

    /// {0, 1}-valued grayscale copy.
    pub fn to_gray(&self) -> GrayVolume {
        GrayVolume {
            shape: self.shape,
            values: self
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// A volume as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Volume {
    Gray(GrayVolume),
    Binary(BinaryVolume),
}

impl Volume {
    pub fn shape(&self) -> Shape {
        match self {
            Volume::Gray(v) => v.shape(),
            Volume::Binary(v) => v.shape(),
        }
    }

    /// Grayscale view; binary volumes map to {0, 1}.
    pub fn into_gray(self) -> GrayVolume {
        match self {
            Volume::Gray(v) => v,
            Volume::Binary(v) => v.to_gray(),
        }
    }

    /// Binary view; grayscale volumes must be {0, 1}-valued.
    pub fn into_binary(self) -> Result<BinaryVolume> {
        match self {
            Volume::Gray(v) => v.to_binary(),
            Volume::Binary(v) => Ok(v),
        }
    }
}

impl From<GrayVolume> for Volume {
    fn from(v: GrayVolume) -> Self {
        Volume::Gray(v)
    }
}

impl From<BinaryVolume> for Volume {
    fn from(v: BinaryVolume) -> Self {
        Volume::Binary(v)
    }
}

const MAGIC: &[u8] = b"VGRID1\n";
const ORDER: &str = "x-slowest";

#[derive(Serialize, Deserialize)]
struct Header {
    dtype: String,
    shape: Vec<usize>,
    order: String,
}

/// Writes a volume in VGRID v1 format: magic line, JSON header line, then a
/// little-endian payload (`f32` for grayscale, `u8` in {0, 1} for binary).
pub fn write_volume<W: Write>(mut w: W, volume: &Volume) -> Result<()> {
    let shape = volume.shape();
    let dtype = match volume {
        Volume::Gray(_) => "f32",
        Volume::Binary(_) => "u8",
    };
    let header = Header {
        dtype: dtype.to_string(),
        shape: shape.to_vec(),
        order: ORDER.to_string(),
    };
    w.write_all(MAGIC)?;
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    match volume {
        Volume::Gray(v) => {
            let mut buf = Vec::with_capacity(v.len() * 4);
            for x in v.values() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Volume::Binary(v) => {
            let buf: Vec<u8> = v.bits().iter().map(|&b| b as u8).collect();
            w.write_all(&buf)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a VGRID v1 stream. `u8` payloads whose values are all 0 or 1 come
/// back as [`Volume::Binary`]; other `u8` payloads are widened to grayscale.
pub fn read_volume<R: Read>(mut r: R) -> Result<Volume> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_volume(&bytes)
}

fn parse_volume(bytes: &[u8]) -> Result<Volume> {
    let rest = bytes.strip_prefix(MAGIC).ok_or(Error::BadMagic)?;
    let newline = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("header line is not terminated".into()))?;
    let header: Header = serde_json::from_slice(&rest[..newline])
        .map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let payload = &rest[newline + 1..];

    if header.order != ORDER {
        return Err(Error::MalformedHeader(format!(
            "unsupported voxel order {:?}",
            header.order
        )));
    }
    let shape: Shape = header.shape.as_slice().try_into().map_err(|_| {
        Error::MalformedHeader(format!(
            "shape must have 3 extents, got {}",
            header.shape.len()
        ))
    })?;
    let count = check_shape(shape).map_err(|_| {
        Error::MalformedHeader(format!("shape {shape:?} must have positive extents"))
    })?;
    let width = match header.dtype.as_str() {
        "f32" => 4,
        "u8" => 1,
        other => return Err(Error::UnsupportedDtype(other.to_string())),
    };
    let expected = count * width;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::TrailingBytes {
            extra: payload.len() - expected,
        });
    }

    if width == 4 {
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Volume::Gray(GrayVolume::new(shape, values)?))
    } else if payload.iter().all(|&b| b <= 1) {
        let bits = payload.iter().map(|&b| b == 1).collect();
        Ok(Volume::Binary(BinaryVolume::new(shape, bits)?))
    } else {
        let values = payload.iter().map(|&b| b as f32).collect();
        Ok(Volume::Gray(GrayVolume::new(shape, values)?))
    }
}

pub fn save_volume(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_volume(BufWriter::new(file), volume)
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let file = File::open(path)?;
    read_volume(BufReader::new(file))
}

/// Foreground where `value >= tau`.
pub fn binarize(v: &GrayVolume, tau: f32) -> BinaryVolume {
    BinaryVolume {
        shape: v.shape,
        bits: v.values.iter().map(|&x| x >= tau).collect(),
    }
}

/// Strictly increasing list of the distinct values occurring in `a` or `b`.
pub fn sorted_distinct_union(a: &GrayVolume, b: &GrayVolume) -> Result<Vec<f32>> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch(a.shape, b.shape));
    }
    let mut values: Vec<f32> = a.values.iter().chain(&b.values).copied().collect();
    // Finite by construction, so partial_cmp never fails.
    values.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    values.dedup();
    Ok(values)
}

pub const OTSU_BINS: usize = 256;

/// Otsu threshold over a 256-bin histogram spanning `[min, max]`.
///
/// Cut `k` (1..=255) splits bins `0..k` from `k..256` and corresponds to the
/// threshold `min + k * (max - min) / 256`; binarizing at it with `>=` puts
/// bins `k..` in the foreground. Class means use the actual voxel values.
/// Ties go to the lowest threshold. A constant volume returns its value.
pub fn otsu_threshold(v: &GrayVolume) -> f32 {
    let (lo, hi) = v.min_max();
    if lo >= hi {
        return lo;
    }
    let lo64 = lo as f64;
    let width = (hi as f64 - lo64) / OTSU_BINS as f64;
    let mut counts = [0u64; OTSU_BINS];
    let mut sums = [0f64; OTSU_BINS];
    for &x in v.values() {
        let t = ((x as f64 - lo64) / width) as usize;
        let bin = t.min(OTSU_BINS - 1);
        counts[bin] += 1;
        sums[bin] += x as f64;
    }
    let total = v.len() as f64;
    let total_sum: f64 = sums.iter().sum();

    let mut best_cut = 0;
    let mut best_var = f64::NEG_INFINITY;
    let (mut n0, mut s0) = (0u64, 0f64);
    for k in 1..OTSU_BINS {
        n0 += counts[k - 1];
        s0 += sums[k - 1];
        let n1 = v.len() as u64 - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let w0 = n0 as f64 / total;
        let w1 = n1 as f64 / total;
        let mu0 = s0 / n0 as f64;
        let mu1 = (total_sum - s0) / n1 as f64;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_cut = k;
        }
    }
    if best_cut == 0 {
        return lo;
    }
    let t = (lo64 + best_cut as f64 * width) as f32;
    t.clamp(lo, hi)
}
