//! Executable checks of the injectivity and stability properties of the
//! thresholded transform.
//!
//! * threshold injectivity: with at least as many thresholds as distinct
//!   voxel values, two grayscale volumes have the same binarization sequence
//!   only if they are equal;
//! * incident cubes: a voxel of a d-dimensional grid is a vertex of at most
//!   3^d cubes;
//! * stability: flipping k voxels moves the Euler curve along any direction by
//!   at most `k · 3^d · n / √d` in L2 over heights (n = grid voxel count), and
//!   the direction-integrated distance by that times the sphere's area.

use rayon::prelude::*;
use serde::Serialize;

use crate::cubical::{count_incident_cubes, LowerStarWeights};
use crate::ect::{euler_curve, grid_height_range, normalize, Direction, RangeMode};
use crate::error::{Error, Result};
use crate::loss::select_thresholds;
use crate::rng::{derive_seed, SplitMix64};
use crate::volume::{binarize, coord_of, sorted_distinct_union, BinaryVolume, GrayVolume, Shape};

/// Binarizations of `v` at each threshold.
pub fn binarization_sequence(v: &GrayVolume, taus: &[f32]) -> Vec<BinaryVolume> {
    taus.iter().map(|&t| binarize(v, t)).collect()
}

/// Checks the injectivity statement for one pair at `t` thresholds: the two
/// binarization sequences agree exactly when the volumes agree.
pub fn check_lemma1(i1: &GrayVolume, i2: &GrayVolume, t: usize) -> Result<bool> {
    let distinct = sorted_distinct_union(i1, i2)?.len();
    if t < distinct {
        return Err(Error::Precondition(format!(
            "{t} thresholds cannot separate {distinct} distinct values"
        )));
    }
    let taus = select_thresholds(i1, i2, t)?;
    let same_sequences = binarization_sequence(i1, &taus) == binarization_sequence(i2, &taus);
    Ok(same_sequences == (i1 == i2))
}

/// Grid dimension: the number of axes with more than one voxel.
pub fn grid_dimension(shape: Shape) -> u32 {
    shape.iter().filter(|&&n| n > 1).count() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Report {
    pub shape: Shape,
    pub dimension: u32,
    pub bound: usize,
    pub max_count: usize,
    pub corner_count: usize,
    pub interior_voxels: usize,
    pub pass: bool,
}

/// Incident-cube counts on the all-foreground grid: every voxel is within
/// `3^d`, and exactly the interior voxels reach it.
pub fn check_cube_count_bound(shape: Shape) -> Result<Lemma2Report> {
    let full = BinaryVolume::full(shape)?;
    let d = grid_dimension(shape);
    let bound = 3usize.pow(d);
    let mut max_count = 0;
    let mut interior_voxels = 0;
    let mut pass = true;
    for i in 0..full.len() {
        let v = coord_of(shape, i);
        let count = count_incident_cubes(&full, v)?;
        let interior = (0..3).all(|a| shape[a] == 1 || (v[a] > 0 && v[a] + 1 < shape[a]));
        interior_voxels += interior as usize;
        max_count = max_count.max(count);
        pass &= count <= bound && (count == bound) == interior;
    }
    Ok(Lemma2Report {
        shape,
        dimension: d,
        bound,
        max_count,
        corner_count: count_incident_cubes(&full, [0, 0, 0])?,
        interior_voxels,
        pass,
    })
}

/// Signed events `(entry height, χ change)` of `b1` minus `b2` along `u`.
fn difference_events(b1: &BinaryVolume, b2: &BinaryVolume, u: Direction) -> Vec<(f64, i64)> {
    let mut events = Vec::new();
    for (b, sign) in [(b1, 1i64), (b2, -1i64)] {
        let w = LowerStarWeights::new(b);
        events.extend(w.for_direction(u).iter().map(|&(v, x)| {
            let h = u[0] * v[0] as f64 + u[1] * v[1] as f64 + u[2] * v[2] as f64;
            (h, sign * x as i64)
        }));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    events
}

fn check_pair(b1: &BinaryVolume, b2: &BinaryVolume) -> Result<()> {
    if b1.shape() != b2.shape() {
        return Err(Error::ShapeMismatch(b1.shape(), b2.shape()));
    }
    Ok(())
}

/// L2 distance between the Euler curves of `b1` and `b2` along `u`, integrated
/// exactly over the grid's height range: the curves are step functions, so
/// the integral is a sum over the intervals between entry heights.
///
/// A zero-length range falls back to the absolute difference of the full
/// complexes' Euler characteristics.
pub fn measured_ec_distance(b1: &BinaryVolume, b2: &BinaryVolume, u: Direction) -> Result<f64> {
    check_pair(b1, b2)?;
    let u = normalize(u)?;
    let (h_min, h_max) = grid_height_range(b1.shape(), u);
    let events = difference_events(b1, b2, u);
    if h_max <= h_min {
        let total: i64 = events.iter().map(|e| e.1).sum();
        return Ok(total.unsigned_abs() as f64);
    }
    let mut integral = 0.0;
    let mut diff = 0i64;
    let mut k = 0;
    while k < events.len() {
        let h = events[k].0;
        while k < events.len() && events[k].0 == h {
            diff += events[k].1;
            k += 1;
        }
        let next = events.get(k).map_or(h_max, |e| e.0).min(h_max);
        integral += (diff * diff) as f64 * (next - h).max(0.0);
    }
    Ok(integral.sqrt())
}

/// Left Riemann sum `sqrt(Σ_{j<M} (χ1 - χ2)(h_j)² · dh)` over the grid range.
pub fn riemann_ec_distance(
    b1: &BinaryVolume,
    b2: &BinaryVolume,
    u: Direction,
    steps: usize,
) -> Result<f64> {
    check_pair(b1, b2)?;
    let c1 = euler_curve(b1, u, steps, RangeMode::Grid)?;
    let c2 = euler_curve(b2, u, steps, RangeMode::Grid)?;
    if c1.dh == 0.0 {
        let d = c1.samples[steps] - c2.samples[steps];
        return Ok(d.unsigned_abs() as f64);
    }
    let sum: i64 = c1.samples[..steps]
        .iter()
        .zip(&c2.samples[..steps])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum as f64 * c1.dh).sqrt())
}

/// Doubles `M` from `steps` until the Riemann estimate moves by less than
/// `rel_tol`, or `max_steps` is reached. Returns the estimate and final `M`.
pub fn refined_riemann_ec_distance(
    b1: &BinaryVolume,
    b2: &BinaryVolume,
    u: Direction,
    steps: usize,
    rel_tol: f64,
    max_steps: usize,
) -> Result<(f64, usize)> {
    let mut m = steps.max(1);
    let mut prev = riemann_ec_distance(b1, b2, u, m)?;
    while m * 2 <= max_steps {
        m *= 2;
        let next = riemann_ec_distance(b1, b2, u, m)?;
        let converged = (next - prev).abs() <= rel_tol * next.abs().max(prev.abs());
        prev = next;
        if converged {
            break;
        }
    }
    Ok((prev, m))
}

/// `k · 3^d · n / √d` with `n` the grid's voxel count.
pub fn stability_bound(shape: Shape, k: usize) -> f64 {
    let d = grid_dimension(shape);
    let n = shape.iter().product::<usize>() as f64;
    k as f64 * 3f64.powi(d as i32) * n / (d as f64).sqrt()
}

/// Surface area of the unit sphere S^{d-1}.
pub fn sphere_area(d: u32) -> f64 {
    match d {
        1 => 2.0,
        2 => std::f64::consts::TAU,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityTrial {
    pub grid_shape: Shape,
    pub k: usize,
    pub direction: Direction,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl StabilityTrial {
    /// `measured / bound`; zero when both vanish.
    pub fn slack_ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.measured / self.bound
        } else if self.measured == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Direction-integrated check for one flipped pair: the sphere area times
/// the mean per-direction distance against the area-scaled bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryCheck {
    pub k: usize,
    pub directions: usize,
    pub integrated: f64,
    pub bound: f64,
    pub pass: bool,
}

/// One trial: flips the listed voxels of `base` and compares along `u`.
pub fn stability_trial(
    base: &BinaryVolume,
    flips: &[[usize; 3]],
    u: Direction,
) -> Result<StabilityTrial> {
    let mut flipped = base.clone();
    for &c in flips {
        let bit = flipped.contains(c) && flipped.get(c);
        flipped.set(c, !bit)?;
    }
    let shape = base.shape();
    let measured = measured_ec_distance(base, &flipped, u)?;
    let bound = stability_bound(shape, flips.len());
    Ok(StabilityTrial {
        grid_shape: shape,
        k: flips.len(),
        direction: normalize(u)?,
        measured,
        bound,
        pass: measured <= bound,
    })
}

/// Uniform direction on the unit sphere of the grid's non-trivial axes.
pub fn random_grid_direction(shape: Shape, rng: &mut SplitMix64) -> Direction {
    loop {
        let mut u = [0.0; 3];
        for a in 0..3 {
            if shape[a] > 1 {
                u[a] = rng.next_normal();
            }
        }
        if let Ok(u) = normalize(u) {
            return u;
        }
    }
}

fn random_volume(shape: Shape, fill: f64, rng: &mut SplitMix64) -> Result<BinaryVolume> {
    BinaryVolume::from_fn(shape, |_| rng.bernoulli(fill))
}

/// `k` distinct voxels chosen uniformly.
fn random_voxels(shape: Shape, k: usize, rng: &mut SplitMix64) -> Vec<[usize; 3]> {
    let n = shape.iter().product::<usize>();
    let mut idx: Vec<usize> = (0..n).collect();
    let k = k.min(n);
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx[..k].iter().map(|&i| coord_of(shape, i)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySuite {
    pub trials: Vec<StabilityTrial>,
    pub corollary: Vec<CorollaryCheck>,
    pub passed: usize,
    pub failed: usize,
    pub worst_slack_ratio: f64,
    pub worst_corollary_ratio: f64,
}

impl StabilitySuite {
    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }
}

/// Directions averaged per trial for the integrated check.
pub const COROLLARY_DIRECTIONS: usize = 16;

/// Randomised stability trials on `shape`: a random base volume (half
/// filled), `k` in `1..=k_max` flipped voxels and a random direction per
/// trial, plus the integrated check over [`COROLLARY_DIRECTIONS`] directions.
/// Trial `i` uses the seed `derive_seed(seed, i)`, so results do not depend on
/// the thread count.
pub fn run_stability_suite(
    trials: usize,
    shape: Shape,
    k_max: usize,
    seed: u64,
) -> Result<StabilitySuite> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial is required".into(),
        ));
    }
    let d = grid_dimension(shape);
    if d == 0 {
        return Err(Error::InvalidParameter(format!(
            "grid {shape:?} has no extent"
        )));
    }
    let k_max = k_max.max(1);
    let results = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::new(derive_seed(seed, i as u64));
            let base = random_volume(shape, 0.5, &mut rng)?;
            let k = 1 + rng.below(k_max as u64) as usize;
            let flips = random_voxels(shape, k, &mut rng);
            let u = random_grid_direction(shape, &mut rng);
            let trial = stability_trial(&base, &flips, u)?;

            let mut flipped = base.clone();
            for &c in &flips {
                let bit = flipped.get(c);
                flipped.set(c, !bit)?;
            }
            let mut sum = 0.0;
            for _ in 0..COROLLARY_DIRECTIONS {
                let v = random_grid_direction(shape, &mut rng);
                sum += measured_ec_distance(&base, &flipped, v)?;
            }
            let area = sphere_area(d);
            let integrated = area * sum / COROLLARY_DIRECTIONS as f64;
            let bound = trial.bound * area;
            let corollary = CorollaryCheck {
                k,
                directions: COROLLARY_DIRECTIONS,
                integrated,
                bound,
                pass: integrated <= bound,
            };
            Ok((trial, corollary))
        })
        .collect::<Result<Vec<_>>>()?;

    let (trials, corollary): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let failed =
        trials.iter().filter(|t| !t.pass).count() + corollary.iter().filter(|c| !c.pass).count();
    let worst_slack_ratio = trials
        .iter()
        .map(StabilityTrial::slack_ratio)
        .fold(0.0, f64::max);
    let worst_corollary_ratio = corollary
        .iter()
        .map(|c| c.integrated / c.bound)
        .fold(0.0, f64::max);
    Ok(StabilitySuite {
        passed: trials.len() - trials.iter().filter(|t| !t.pass).count(),
        trials,
        corollary,
        failed,
        worst_slack_ratio,
        worst_corollary_ratio,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma1Suite {
    pub trials: usize,
    pub passed: usize,
    pub identical_pairs: usize,
    pub differing_pairs: usize,
}

/// Random grayscale pairs drawn from a small value palette, so that equal
/// pairs, single-voxel differences and unrelated pairs all occur. Each pair is
/// checked at `t = |distinct union|`.
pub fn run_lemma1_suite(trials: usize, shape: Shape, seed: u64) -> Result<Lemma1Suite> {
    const PALETTE: [f32; 6] = [0.0, 0.1, 0.25, 0.5, 0.75, 1.0];
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::new(derive_seed(seed, i as u64));
            let pick = |rng: &mut SplitMix64| PALETTE[rng.below(PALETTE.len() as u64) as usize];
            let i1 = GrayVolume::from_fn(shape, |_| pick(&mut rng))?;
            let i2 = match i % 3 {
                0 => i1.clone(),
                1 => {
                    let mut values = i1.values().to_vec();
                    let at = rng.below(values.len() as u64) as usize;
                    values[at] = pick(&mut rng);
                    GrayVolume::new(shape, values)?
                }
                _ => GrayVolume::from_fn(shape, |_| pick(&mut rng))?,
            };
            let t = sorted_distinct_union(&i1, &i2)?.len();
            Ok((check_lemma1(&i1, &i2, t)?, i1 == i2))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Lemma1Suite {
        trials,
        passed: outcomes.iter().filter(|o| o.0).count(),
        identical_pairs: outcomes.iter().filter(|o| o.1).count(),
        differing_pairs: outcomes.iter().filter(|o| !o.1).count(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Suite {
    pub reports: Vec<Lemma2Report>,
    pub passed: usize,
    pub failed: usize,
    /// Largest incident-cube count seen per grid dimension 0..=3.
    pub max_by_dimension: [usize; 4],
}

/// [`check_cube_count_bound`] for every grid shape up to `max_extent` per axis.
pub fn run_lemma2_suite(max_extent: usize) -> Result<Lemma2Suite> {
    let mut shapes = Vec::new();
    for x in 1..=max_extent {
        for y in 1..=max_extent {
            for z in 1..=max_extent {
                shapes.push([x, y, z]);
            }
        }
    }
    let reports = shapes
        .par_iter()
        .map(|&s| check_cube_count_bound(s))
        .collect::<Result<Vec<_>>>()?;
    let mut max_by_dimension = [0; 4];
    for r in &reports {
        let m = &mut max_by_dimension[r.dimension as usize];
        *m = (*m).max(r.max_count);
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    Ok(Lemma2Suite {
        failed: reports.len() - passed,
        passed,
        reports,
        max_by_dimension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_injectivity_examples() {
        let a = GrayVolume::from_fn([2, 2, 2], |[x, y, z]| (x + y + z) as f32 / 3.0).unwrap();
        assert!(check_lemma1(&a, &a, 4).unwrap());

        let mut values = a.values().to_vec();
        values[3] = 1.0; // (0, 1, 1): 2/3 -> 1
        let b = GrayVolume::new([2, 2, 2], values).unwrap();
        let t = sorted_distinct_union(&a, &b).unwrap().len();
        assert!(check_lemma1(&a, &b, t).unwrap());
        let taus = select_thresholds(&a, &b, t).unwrap();
        let sa = binarization_sequence(&a, &taus);
        let sb = binarization_sequence(&b, &taus);
        let differing: Vec<f32> = taus
            .iter()
            .zip(sa.iter().zip(&sb))
            .filter(|(_, (x, y))| x != y)
            .map(|(t, _)| *t)
            .collect();
        assert_eq!(differing, vec![1.0]);

        assert!(matches!(
            check_lemma1(&a, &b, 2),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn incident_cube_bound_shapes() {
        let r = check_cube_count_bound([5, 5, 5]).unwrap();
        assert!(r.pass);
        assert_eq!(
            (r.max_count, r.interior_voxels, r.corner_count),
            (27, 27, 8)
        );
        let r = check_cube_count_bound([2, 2, 2]).unwrap();
        assert!(r.pass);
        assert_eq!((r.max_count, r.interior_voxels), (8, 0));
        let r = check_cube_count_bound([5, 5, 1]).unwrap();
        assert!(r.pass);
        assert_eq!((r.dimension, r.max_count), (2, 9));
    }

    #[test]
    fn measured_distance_basics() {
        let a = BinaryVolume::from_coords([4, 4, 4], &[[1, 1, 1], [1, 1, 2]]).unwrap();
        let u = [0.0, 0.0, 1.0];
        assert_eq!(measured_ec_distance(&a, &a, u).unwrap(), 0.0);
        // The extra voxel enters together with its edge, so χ never differs.
        let b = BinaryVolume::from_coords([4, 4, 4], &[[1, 1, 1]]).unwrap();
        assert_eq!(measured_ec_distance(&a, &b, u).unwrap(), 0.0);
        // A second component entering at z = 2 differs by 1 on [2, 3].
        let c = BinaryVolume::from_coords([4, 4, 4], &[[1, 1, 1], [3, 3, 2]]).unwrap();
        assert_eq!(measured_ec_distance(&c, &b, u).unwrap(), 1.0);
        let bound = stability_bound([4, 4, 4], 1);
        assert!((bound - 27.0 * 64.0 / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn riemann_refinement_converges_to_exact() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..20 {
            let a = random_volume([4, 4, 4], 0.5, &mut rng).unwrap();
            let b = random_volume([4, 4, 4], 0.5, &mut rng).unwrap();
            let u = random_grid_direction([4, 4, 4], &mut rng);
            let exact = measured_ec_distance(&a, &b, u).unwrap();
            let fine = riemann_ec_distance(&a, &b, u, 100_000).unwrap();
            assert!(
                (fine - exact).abs() <= 1e-3 * exact.max(1e-12),
                "{fine} vs {exact}"
            );
            // The doubling gate stops on small successive changes, which is
            // looser than the error against the exact value.
            let (approx, _) = refined_riemann_ec_distance(&a, &b, u, 30, 1e-3, 1 << 20).unwrap();
            assert!(
                (approx - exact).abs() <= 0.05 * exact.max(1e-12),
                "{approx} vs {exact}"
            );
        }
    }

    #[test]
    fn zero_flip_trial() {
        let base = BinaryVolume::full([3, 3, 3]).unwrap();
        let t = stability_trial(&base, &[], [0.0, 1.0, 0.0]).unwrap();
        assert_eq!((t.measured, t.bound), (0.0, 0.0));
        assert!(t.pass);
        assert_eq!(t.slack_ratio(), 0.0);
    }

    #[test]
    fn slab_trials_use_planar_bound() {
        let s = run_stability_suite(20, [5, 5, 1], 5, 1).unwrap();
        assert!(s.all_pass());
        for t in &s.trials {
            assert_eq!(t.direction[2], 0.0);
            assert_eq!(t.bound, t.k as f64 * 9.0 * 25.0 / 2f64.sqrt());
        }
    }

    #[test]
    fn suites_are_deterministic() {
        let a = run_stability_suite(10, [4, 4, 4], 5, 9).unwrap();
        let b = run_stability_suite(10, [4, 4, 4], 5, 9).unwrap();
        assert_eq!(a.trials, b.trials);
    }
}
