//! Euler characteristic transforms of 3D voxel volumes and a multi-threshold
//! topological loss built on them.
//!
//! * [`volume`]: voxel grids, VGRID I/O, thresholding, Otsu
//! * [`cubical`]: cubical complexes of binary volumes and their cell counts
//! * [`ect`]: height filtrations, Euler curves, sampled transforms, distances
//! * [`loss`]: the thresholded transform loss and soft DICE
//! * [`metrics`]: IoU, volume and surface errors
//! * [`verify`]: randomised checks of the injectivity and stability bounds
//! * [`cli`]: the `ect` command line
//!
//! ```
//! use ect::{compute_ect, sample_directions, total_loss, BinaryVolume, DirectionMode, GrayVolume, LossConfig, RangeMode};
//!
//! let shell = BinaryVolume::from_fn([3, 3, 3], |c| c != [1, 1, 1])?;
//! assert_eq!(ect::cell_counts(&shell).euler_characteristic(), 2);
//!
//! let dirs = sample_directions(16, 0, DirectionMode::Fibonacci)?;
//! let matrix = compute_ect(&shell, &dirs, 30, RangeMode::Grid)?;
//! assert_eq!(matrix.rows(), 16);
//!
//! let pred = GrayVolume::from_fn([8, 8, 8], |[x, y, z]| (x + y + z) as f32 / 21.0)?;
//! let gt = GrayVolume::from_fn([8, 8, 8], |[x, _, _]| if x < 4 { 1.0 } else { 0.0 })?;
//! let report = total_loss(&pred, &gt, &LossConfig { seed: 7, ..Default::default() })?;
//! assert!(report.topo > 0.0);
//! # Ok::<(), ect::Error>(())
//! ```

pub mod bench;
pub mod cli;
pub mod cubical;
pub mod ect;
pub mod error;
pub mod fixtures;
pub mod loss;
pub mod metrics;
pub mod rng;
pub mod verify;
pub mod volume;

pub use cubical::{
    cell_counts, count_incident_cubes, enumerate_cells, euler_characteristic, CellCounts, Cube,
};
pub use ect::{
    compute_ect, ect_distance, ect_distance_sq, euler_curve, sample_directions, vertex_height,
    DirectionMode, DirectionSet, EctMatrix, EulerCurve, RangeMode,
};
pub use error::{Error, Result};
pub use loss::{dice_loss, select_thresholds, topo_loss, total_loss, LossConfig, LossReport};
pub use metrics::{evaluate, iou_error, surface_error, volume_error, MetricsReport};
pub use volume::{
    binarize, load_volume, otsu_threshold, save_volume, sorted_distinct_union, BinaryVolume,
    GrayVolume, Volume,
};
