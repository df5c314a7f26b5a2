//! Cubical complexes of binary volumes.
//!
//! Foreground voxels are 0-cubes; an i-cube exists wherever the 2^i voxels of
//! a unit i-dimensional block of the lattice are all foreground (face
//! adjacency only). The complex is never materialised on production paths:
//! everything is counted from the occupancy byte of each 2x2x2 block.
//!
//! Axis subsets are 3-bit masks, x = 1, y = 2, z = 4. A block corner is the
//! same kind of mask, read as an offset vector.

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Coord, Shape};

pub const AXIS_X: u8 = 1;
pub const AXIS_Y: u8 = 2;
pub const AXIS_Z: u8 = 4;

#[inline]
pub(crate) fn offset_of(mask: u8) -> [usize; 3] {
    [
        (mask & AXIS_X != 0) as usize,
        (mask & AXIS_Y != 0) as usize,
        (mask & AXIS_Z != 0) as usize,
    ]
}

/// Subsets of `mask`, including the empty set and `mask` itself.
#[inline]
fn subsets(mask: u8) -> impl Iterator<Item = u8> {
    (0..8u8).filter(move |s| s & !mask == 0)
}

/// An elementary cube: the voxels `anchor + offset(o)` for every `o ⊆ axes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    pub anchor: Coord,
    pub axes: u8,
}

impl Cube {
    pub fn dim(&self) -> usize {
        self.axes.count_ones() as usize
    }

    /// Constituent voxels (the cube's vertices).
    pub fn vertices(&self) -> impl Iterator<Item = Coord> + '_ {
        subsets(self.axes).map(move |o| {
            let d = offset_of(o);
            [
                self.anchor[0] + d[0],
                self.anchor[1] + d[1],
                self.anchor[2] + d[2],
            ]
        })
    }

    /// `(-1)^dim`.
    pub fn sign(&self) -> i64 {
        if self.dim().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

fn cube_present(b: &BinaryVolume, anchor: Coord, axes: u8) -> bool {
    let shape = b.shape();
    let [ox, oy, oz] = offset_of(axes);
    if anchor[0] + ox >= shape[0] || anchor[1] + oy >= shape[1] || anchor[2] + oz >= shape[2] {
        return false;
    }
    Cube { anchor, axes }.vertices().all(|v| b.get(v))
}

/// Every cube of the complex exactly once, ordered by anchor then axis mask.
pub fn enumerate_cells(b: &BinaryVolume) -> impl Iterator<Item = Cube> + '_ {
    b.foreground().flat_map(move |anchor| {
        (0..8u8)
            .filter(move |&axes| cube_present(b, anchor, axes))
            .map(move |axes| Cube { anchor, axes })
    })
}

/// Number of i-cubes for i = 0..=3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct CellCounts {
    pub counts: [u64; 4],
}

impl CellCounts {
    pub fn euler_characteristic(&self) -> i64 {
        euler_characteristic(self)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Alternating sum `Σ (-1)^i counts[i]`.
pub fn euler_characteristic(c: &CellCounts) -> i64 {
    c.counts
        .iter()
        .enumerate()
        .map(|(i, &n)| if i % 2 == 0 { n as i64 } else { -(n as i64) })
        .sum()
}

/// `DIM_COUNTS[occ]`: cubes anchored at corner 0 of a 2x2x2 block with
/// occupancy `occ`, by dimension.
static DIM_COUNTS: [[u8; 4]; 256] = build_dim_counts();

const fn all_corners_set(occ: u8, corner: u8, mask: u8) -> bool {
    // corners `corner ^ o` for every o ⊆ mask
    let mut o = 0u8;
    while o < 8 {
        if o & !mask == 0 && occ & (1 << (corner ^ o)) == 0 {
            return false;
        }
        o += 1;
    }
    true
}

const fn build_dim_counts() -> [[u8; 4]; 256] {
    let mut table = [[0u8; 4]; 256];
    let mut occ = 0usize;
    while occ < 256 {
        let mut mask = 0u8;
        while mask < 8 {
            if all_corners_set(occ as u8, 0, mask) {
                table[occ][mask.count_ones() as usize] += 1;
            }
            mask += 1;
        }
        occ += 1;
    }
    table
}

/// `STAR_WEIGHTS[corner][occ]`: signed count `Σ (-1)^dim` of the cubes inside
/// a block with occupancy `occ` that contain `corner` and extend from it only
/// towards the opposite corner.
static STAR_WEIGHTS: [[i8; 256]; 8] = build_star_weights();

const fn build_star_weights() -> [[i8; 256]; 8] {
    let mut table = [[0i8; 256]; 8];
    let mut corner = 0u8;
    while corner < 8 {
        let mut occ = 0usize;
        while occ < 256 {
            let mut w = 0i8;
            let mut mask = 0u8;
            while mask < 8 {
                if all_corners_set(occ as u8, corner, mask) {
                    w += if mask.count_ones().is_multiple_of(2) {
                        1
                    } else {
                        -1
                    };
                }
                mask += 1;
            }
            table[corner as usize][occ] = w;
            occ += 1;
        }
        corner += 1;
    }
    table
}

/// Occupancy bytes of every 2x2x2 block overlapping the grid.
///
/// Block `(bx, by, bz)` (each in `0..=n`) covers voxels
/// `(bx - 1 + ox, by - 1 + oy, bz - 1 + oz)`; bit `o` of its byte is set when
/// that voxel is inside the grid and foreground.
struct BlockOccupancy {
    dims: [usize; 3],
    occ: Vec<u8>,
}

impl BlockOccupancy {
    fn new(b: &BinaryVolume) -> Self {
        let shape = b.shape();
        let dims = [shape[0] + 1, shape[1] + 1, shape[2] + 1];
        let mut occ = vec![0u8; dims[0] * dims[1] * dims[2]];
        // Scatter each foreground voxel into the 8 blocks that contain it.
        for [x, y, z] in b.foreground() {
            for corner in 0..8u8 {
                let [ox, oy, oz] = offset_of(corner);
                let (bx, by, bz) = (x + 1 - ox, y + 1 - oy, z + 1 - oz);
                occ[(bx * dims[1] + by) * dims[2] + bz] |= 1 << corner;
            }
        }
        Self { dims, occ }
    }

    /// Byte of the block whose corner `corner` is voxel `v`.
    #[inline]
    fn at(&self, [x, y, z]: Coord, corner: u8) -> u8 {
        let [ox, oy, oz] = offset_of(corner);
        let (bx, by, bz) = (x + 1 - ox, y + 1 - oy, z + 1 - oz);
        self.occ[(bx * self.dims[1] + by) * self.dims[2] + bz]
    }
}

/// Cell counts by dimension, from block occupancy.
pub fn cell_counts(b: &BinaryVolume) -> CellCounts {
    let blocks = BlockOccupancy::new(b);
    let mut counts = [0u64; 4];
    for v in b.foreground() {
        let per_dim = &DIM_COUNTS[blocks.at(v, 0) as usize];
        for (c, &n) in counts.iter_mut().zip(per_dim) {
            *c += n as u64;
        }
    }
    CellCounts { counts }
}

/// Number of cubes of `b`'s complex having `voxel` as a vertex.
pub fn count_incident_cubes(b: &BinaryVolume, voxel: Coord) -> Result<usize> {
    if !b.contains(voxel) {
        return Err(Error::OutOfBounds(voxel));
    }
    let v = voxel.map(|c| c as isize);
    let mut n = 0;
    for axes in 0..8u8 {
        // `negative ⊆ axes` picks the direction along each spanned axis.
        for negative in subsets(axes) {
            let present = subsets(axes).all(|o| {
                let mut p = v;
                for (a, bit) in [AXIS_X, AXIS_Y, AXIS_Z].into_iter().enumerate() {
                    if o & bit != 0 {
                        p[a] += if negative & bit != 0 { -1 } else { 1 };
                    }
                }
                b.get_signed(p)
            });
            if present {
                n += 1;
            }
        }
    }
    Ok(n)
}

/// Signed lower-star weights of the complex for one orientation octant.
///
/// For a direction `u`, every cube's highest vertex along `u` is found by
/// stepping from its anchor along each spanned axis with `u_a >= 0`. Grouping
/// cubes by that vertex gives, per voxel, the weight `Σ (-1)^dim` of the cubes
/// entering the height filtration exactly at that voxel's height. Only the
/// sign pattern of `u` matters, hence one weight list per octant. Voxels with
/// zero weight (e.g. the interior of solid regions) are omitted.
#[derive(Debug, Clone)]
pub struct LowerStarWeights {
    shape: Shape,
    octants: [Vec<([u32; 3], i8)>; 8],
    euler: i64,
}

impl LowerStarWeights {
    pub fn new(b: &BinaryVolume) -> Self {
        let blocks = BlockOccupancy::new(b);
        let mut octants: [Vec<([u32; 3], i8)>; 8] = Default::default();
        for v in b.foreground() {
            let c = v.map(|x| x as u32);
            for (corner, list) in octants.iter_mut().enumerate() {
                let w = STAR_WEIGHTS[corner][blocks.at(v, corner as u8) as usize];
                if w != 0 {
                    list.push((c, w));
                }
            }
        }
        let euler = octants[0].iter().map(|&(_, w)| w as i64).sum();
        Self {
            shape: b.shape(),
            octants,
            euler,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Euler characteristic of the whole complex.
    pub fn euler_characteristic(&self) -> i64 {
        self.euler
    }

    /// Octant index of a direction: bit `a` set when `u[a] >= 0`.
    pub fn octant(u: [f64; 3]) -> usize {
        (u[0] >= 0.0) as usize | ((u[1] >= 0.0) as usize) << 1 | ((u[2] >= 0.0) as usize) << 2
    }

    /// Weighted vertices for direction `u`.
    pub fn for_direction(&self, u: [f64; 3]) -> &[([u32; 3], i8)] {
        &self.octants[Self::octant(u)]
    }
}
