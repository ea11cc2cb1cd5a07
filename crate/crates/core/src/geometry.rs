//! Collision-free configuration spaces built from axis-aligned boxes.
//!
//! An [`Environment`] is a finite union of closed boxes with pairwise-disjoint
//! interiors. Membership, volume, and straight-line collision checks are all
//! exact; segment checks clip the segment parametrically against every box and
//! test whether the resulting parameter intervals cover `[0, 1]`.

use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when merging clipped parameter intervals.
pub const MERGE_TOL: f64 = 1e-9;

/// A configuration-space point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    /// The origin of `R^dim` with the first coordinate set to `x`.
    pub fn on_axis(dim: usize, x: f64) -> Self {
        let mut coords = vec![0.0; dim];
        coords[0] = x;
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// Squared Euclidean distance between two coordinate slices of equal length.
#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A closed axis-aligned box `[lo_0, hi_0] × … × [lo_{d-1}, hi_{d-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct Aabb {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RawBox> for Aabb {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        Aabb::new(raw.lo, raw.hi)
    }
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::validation("box must have dimension >= 1"));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::validation(format!("box axis {i} has non-finite bound")));
            }
            if l >= h {
                return Err(Error::validation(format!("box axis {i}: lo ({l}) must be < hi ({h})")));
            }
        }
        Ok(Aabb { lo, hi })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Aabb::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn shortest_side(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    fn contains_box(&self, other: &Aabb) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b) && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }

    fn interiors_overlap(&self, other: &Aabb) -> bool {
        (0..self.dim()).all(|i| self.lo[i].max(other.lo[i]) < self.hi[i].min(other.hi[i]))
    }

    /// Parameter interval `[t0, t1] ⊆ [0, 1]` of the segment `a + t (b - a)`
    /// lying inside this box, or `None` when the segment misses it.
    pub fn clip_segment(&self, a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for i in 0..self.dim() {
            let dir = b[i] - a[i];
            if dir == 0.0 {
                if a[i] < self.lo[i] || a[i] > self.hi[i] {
                    return None;
                }
                continue;
            }
            let ta = (self.lo[i] - a[i]) / dir;
            let tb = (self.hi[i] - a[i]) / dir;
            let (enter, exit) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(enter);
            t1 = t1.min(exit);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| l + (h - l) * rng.gen::<f64>())
                .collect(),
        )
    }
}

/// Free configuration space: a union of boxes with disjoint interiors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvironment", into = "RawEnvironment")]
pub struct Environment {
    dim: usize,
    boxes: Vec<Aabb>,
    cumulative_volumes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawEnvironment {
    dim: usize,
    boxes: Vec<Aabb>,
}

impl TryFrom<RawEnvironment> for Environment {
    type Error = Error;

    fn try_from(raw: RawEnvironment) -> Result<Self> {
        let env = Environment::new(raw.boxes)?;
        if env.dim != raw.dim {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                got: env.dim,
            });
        }
        Ok(env)
    }
}

impl From<Environment> for RawEnvironment {
    fn from(env: Environment) -> Self {
        RawEnvironment {
            dim: env.dim,
            boxes: env.boxes,
        }
    }
}

impl Environment {
    /// Validates dimensions and interior-disjointness. Boxes may share faces.
    pub fn new(boxes: Vec<Aabb>) -> Result<Self> {
        let dim = match boxes.first() {
            Some(b) => b.dim(),
            None => return Err(Error::validation("environment needs at least one box")),
        };
        for b in &boxes {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.dim(),
                });
            }
        }
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].interiors_overlap(&boxes[j]) {
                    return Err(Error::validation(format!(
                        "boxes {i} and {j} have overlapping interiors"
                    )));
                }
            }
        }
        let mut acc = 0.0;
        let cumulative_volumes = boxes
            .iter()
            .map(|b| {
                acc += b.volume();
                acc
            })
            .collect();
        Ok(Environment {
            dim,
            boxes,
            cumulative_volumes,
        })
    }

    pub fn unit_cube(dim: usize) -> Result<Self> {
        Environment::new(vec![Aabb::unit(dim)?])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("environment serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[Aabb] {
        &self.boxes
    }

    /// Exact free-space volume.
    pub fn volume(&self) -> f64 {
        *self.cumulative_volumes.last().expect("non-empty")
    }

    /// Smallest box enclosing the whole environment.
    pub fn bounding_box(&self) -> Aabb {
        let mut lo = self.boxes[0].lo.clone();
        let mut hi = self.boxes[0].hi.clone();
        for b in &self.boxes[1..] {
            for i in 0..self.dim {
                lo[i] = lo[i].min(b.lo[i]);
                hi[i] = hi[i].max(b.hi[i]);
            }
        }
        Aabb { lo, hi }
    }

    /// Half the shortest side of the smallest box: the largest ball radius
    /// guaranteed to fit inside some box.
    pub fn default_r_max(&self) -> f64 {
        let smallest = self
            .boxes
            .iter()
            .min_by(|a, b| a.volume().total_cmp(&b.volume()))
            .expect("non-empty");
        smallest.shortest_side() / 2.0
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Membership in the closed union of boxes.
    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        self.check_dim(p)?;
        Ok(self.contains_unchecked(p))
    }

    pub(crate) fn contains_unchecked(&self, p: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    /// Exact straight-line collision check for the closed segment `a → b`.
    pub fn segment_free(&self, a: &[f64], b: &[f64]) -> Result<bool> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(self.segment_free_unchecked(a, b))
    }

    pub(crate) fn segment_free_unchecked(&self, a: &[f64], b: &[f64]) -> bool {
        // boxes are convex
        if self.boxes.iter().any(|bx| bx.contains(a) && bx.contains(b)) {
            return true;
        }
        let mut intervals: Vec<(f64, f64)> = self.boxes.iter().filter_map(|bx| bx.clip_segment(a, b)).collect();
        covers_unit_interval(&mut intervals)
    }

    /// Parameter intervals of `a → b` inside each box (one entry per box hit).
    pub fn clip_intervals(&self, a: &[f64], b: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(self.boxes.iter().filter_map(|bx| bx.clip_segment(a, b)).collect())
    }

    /// Uniform sample over the union: pick a box by volume, then sample inside it.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let u = rng.gen::<f64>() * self.volume();
        let idx = self
            .cumulative_volumes
            .partition_point(|&c| c <= u)
            .min(self.boxes.len() - 1);
        self.boxes[idx].sample(rng)
    }

    /// Monte Carlo estimate of the free volume using `n` samples of `bounding_box`.
    pub fn volume_mc<R: Rng + ?Sized>(&self, bounding_box: &Aabb, n: u64, rng: &mut R) -> Result<f64> {
        if n == 0 {
            return Err(Error::validation("volume_mc needs n >= 1"));
        }
        if bounding_box.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: bounding_box.dim(),
            });
        }
        if !self.boxes.iter().all(|b| bounding_box.contains_box(b)) {
            return Err(Error::validation("bounding box does not contain the environment"));
        }
        let hits = (0..n)
            .filter(|_| self.contains_unchecked(&bounding_box.sample(rng)))
            .count();
        Ok(hits as f64 / n as f64 * bounding_box.volume())
    }
}

fn covers_unit_interval(intervals: &mut [(f64, f64)]) -> bool {
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut reach = 0.0;
    for &(t0, t1) in intervals.iter() {
        if t0 > reach + MERGE_TOL {
            return false;
        }
        reach = f64::max(reach, t1);
        if reach >= 1.0 - MERGE_TOL {
            return true;
        }
    }
    false
}

/// Parametric narrow-hallway environment: two unit end rooms joined by a
/// hallway `[-0.5, 0.5] × [-delta, delta]^(d-1)`.
pub fn make_hallway(d: usize, delta: f64) -> Result<Environment> {
    if d < 2 {
        return Err(Error::validation("hallway needs d >= 2"));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::validation(format!(
            "hallway half-width must lie in (0, 0.5), got {delta}"
        )));
    }
    hallway_unchecked(d, delta)
}

/// Hallway boxes for any positive half-width. At `delta = 0.5` the hallway
/// fills the gap between the rooms.
pub fn hallway_unchecked(d: usize, delta: f64) -> Result<Environment> {
    let room = |x0: f64, x1: f64| {
        let mut lo = vec![-0.5; d];
        let mut hi = vec![0.5; d];
        lo[0] = x0;
        hi[0] = x1;
        Aabb::new(lo, hi)
    };
    let mut lo = vec![-delta; d];
    let mut hi = vec![delta; d];
    lo[0] = -0.5;
    hi[0] = 0.5;
    Environment::new(vec![room(-1.5, -0.5)?, room(0.5, 1.5)?, Aabb::new(lo, hi)?])
}

/// The standard hallway query `(-0.5, 0, …, 0) → (0.5, 0, …, 0)`.
pub fn hallway_query(d: usize) -> (Point, Point) {
    (Point::on_axis(d, -0.5), Point::on_axis(d, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hallway(d: usize, delta: f64) -> Environment {
        make_hallway(d, delta).unwrap()
    }

    #[test]
    fn hallway_volumes() {
        assert_eq!(hallway(2, 0.25).boxes().len(), 3);
        assert_relative_eq!(hallway(2, 0.25).volume(), 2.5, epsilon = 1e-12);
        assert_relative_eq!(hallway(3, 0.125).volume(), 2.0625, epsilon = 1e-12);
        assert_relative_eq!(hallway(2, 0.499).volume(), 2.998, epsilon = 1e-12);
        assert_relative_eq!(hallway(4, 0.125).volume(), 2.015625, epsilon = 1e-12);
        assert_eq!(Environment::unit_cube(3).unwrap().volume(), 1.0);
    }

    #[test]
    fn hallway_rejects_bad_widths() {
        assert!(make_hallway(2, 0.5).is_err());
        assert!(make_hallway(2, 0.0).is_err());
        assert!(make_hallway(2, -0.1).is_err());
        assert!(make_hallway(1, 0.1).is_err());
    }

    #[test]
    fn membership() {
        let env = hallway(2, 0.25);
        assert!(env.contains(&[0.0, 0.0]).unwrap());
        assert!(!env.contains(&[0.0, 0.3]).unwrap());
        assert!(env.contains(&[-1.0, 0.4]).unwrap());
        assert!(env.contains(&[0.0, 0.25]).unwrap());
        assert!(matches!(env.contains(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn segments() {
        let env = hallway(2, 0.25);
        assert!(env.segment_free(&[-0.5, 0.0], &[0.5, 0.0]).unwrap());
        assert!(!env.segment_free(&[-1.0, 0.4], &[1.0, 0.4]).unwrap());
        assert!(env.segment_free(&[-1.4, -0.4], &[1.4, 0.2]).is_ok());
        // corner cut at the hallway mouth
        assert!(!env.segment_free(&[-0.6, 0.4], &[-0.4, 0.2]).unwrap());
        assert!(env.segment_free(&[-1.2, 0.0], &[1.2, 0.1]).unwrap());
    }

    #[test]
    fn overlapping_boxes_rejected() {
        let a = Aabb::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b = Aabb::new(vec![0.5, 0.5], vec![1.5, 1.5]).unwrap();
        let c = Aabb::new(vec![1.0, 0.0], vec![2.0, 1.0]).unwrap();
        assert!(Environment::new(vec![a.clone(), b]).is_err());
        assert!(Environment::new(vec![a, c]).is_ok());
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(Aabb::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(Aabb::new(vec![0.0], vec![1.0, 1.0]).is_err());
        assert!(Aabb::new(vec![], vec![]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let env = hallway(3, 0.1);
        let text = env.to_json();
        assert!(text.starts_with("{\"dim\":3,\"boxes\":[{\"lo\":"));
        assert_eq!(Environment::from_json(&text).unwrap(), env);
        assert!(Environment::from_json(r#"{"dim": 2, "boxes": [{"lo": [0, 0, 0], "hi": [1, 1, 1]}]}"#).is_err());
        assert!(Environment::from_json(r#"{"dim": 1, "boxes": [{"lo": [1], "hi": [0]}]}"#).is_err());
    }

    #[test]
    fn unit_square_samples_stay_inside() {
        let env = Environment::unit_cube(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = env.sample_uniform(&mut rng);
            assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let env = hallway(2, 0.25);
        let a = env.sample_uniform(&mut ChaCha8Rng::seed_from_u64(11));
        let b = env.sample_uniform(&mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn volume_mc_edge_cases() {
        let env = Environment::unit_cube(2).unwrap();
        let bb = env.bounding_box();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(env.volume_mc(&bb, 1000, &mut rng).unwrap(), 1.0);
        assert!(env.volume_mc(&bb, 0, &mut rng).is_err());

        let hall = hallway(2, 0.25);
        let bb = hall.bounding_box();
        let v = hall.volume_mc(&bb, 1, &mut rng).unwrap();
        assert!(v == 0.0 || v == bb.volume());
        let small = Aabb::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(hall.volume_mc(&small, 10, &mut rng).is_err());
    }

    #[test]
    fn r_max_default() {
        assert_relative_eq!(hallway(2, 0.125).default_r_max(), 0.125);
        assert_relative_eq!(Environment::unit_cube(2).unwrap().default_r_max(), 0.5);
    }
}
