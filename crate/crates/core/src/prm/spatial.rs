//! Exact nearest-neighbor and range search on a uniform grid.
//!
//! Cells are sized so that each holds a couple of points on average. A k-NN
//! query scans Chebyshev shells of cells around the query cell and stops once
//! the k-th candidate is strictly closer than anything outside the scanned
//! block. Small point sets collapse to a single cell, i.e. brute force.

use std::cmp::Ordering;

use crate::geometry::dist_sq;

/// Below this many points the index is a single cell.
pub const BRUTE_FORCE_BELOW: usize = 512;

const POINTS_PER_CELL: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Default)]
pub struct GridIndex {
    dim: usize,
    coords: Vec<f64>,
    origin: Vec<f64>,
    cell_size: Vec<f64>,
    shape: Vec<usize>,
    cell_start: Vec<usize>,
    entries: Vec<usize>,
}

impl GridIndex {
    /// Builds an index over `points` (each of length `dim`).
    pub fn build<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Self {
        let n = points.len();
        let mut coords = Vec::with_capacity(n * dim);
        for p in points {
            coords.extend_from_slice(p.as_ref());
        }
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for (i, x) in p.as_ref().iter().enumerate() {
                lo[i] = lo[i].min(*x);
                hi[i] = hi[i].max(*x);
            }
        }
        if n == 0 {
            lo = vec![0.0; dim];
            hi = vec![0.0; dim];
        }
        let extent: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l).max(1e-12)).collect();

        let shape: Vec<usize> = if n < BRUTE_FORCE_BELOW {
            vec![1; dim]
        } else {
            let volume: f64 = extent.iter().product();
            let side = (volume * POINTS_PER_CELL / n as f64).powf(1.0 / dim as f64);
            let mut shape: Vec<usize> = extent.iter().map(|e| ((e / side).ceil() as usize).max(1)).collect();
            // keep the total cell count linear in n
            while shape.iter().product::<usize>() > 4 * n {
                let widest = (0..dim).max_by_key(|&i| shape[i]).unwrap();
                shape[widest] = (shape[widest] / 2).max(1);
            }
            shape
        };
        let cell_size: Vec<f64> = extent.iter().zip(&shape).map(|(e, s)| e / *s as f64).collect();

        let mut index = GridIndex {
            dim,
            coords,
            origin: lo,
            cell_size,
            shape,
            cell_start: Vec::new(),
            entries: Vec::new(),
        };
        let n_cells: usize = index.shape.iter().product();
        let cell_of: Vec<usize> = (0..n).map(|i| index.flat(&index.cell_of(index.point(i)))).collect();
        let mut counts = vec![0usize; n_cells + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut entries = vec![0usize; n];
        for (i, &c) in cell_of.iter().enumerate() {
            entries[fill[c]] = i;
            fill[c] += 1;
        }
        index.cell_start = counts;
        index.entries = entries;
        index
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn cell_of(&self, p: &[f64]) -> Vec<usize> {
        (0..self.dim)
            .map(|i| {
                let c = ((p[i] - self.origin[i]) / self.cell_size[i]).floor();
                if c < 0.0 {
                    0
                } else {
                    (c as usize).min(self.shape[i] - 1)
                }
            })
            .collect()
    }

    fn flat(&self, cell: &[usize]) -> usize {
        cell.iter().zip(&self.shape).fold(0, |acc, (c, s)| acc * s + c)
    }

    fn cell_entries(&self, cell: &[usize]) -> &[usize] {
        let f = self.flat(cell);
        &self.entries[self.cell_start[f]..self.cell_start[f + 1]]
    }

    /// Calls `visit` on every cell in the box `[lo, hi]` (inclusive cell
    /// indices) whose Chebyshev distance from `center` is at least `min_cheb`.
    fn for_cells(
        &self,
        lo: &[usize],
        hi: &[usize],
        center: &[usize],
        min_cheb: usize,
        mut visit: impl FnMut(&[usize]),
    ) {
        let mut cur = lo.to_vec();
        loop {
            let cheb = cur.iter().zip(center).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0);
            if cheb >= min_cheb {
                visit(&cur);
            }
            let mut axis = 0;
            loop {
                if axis == self.dim {
                    return;
                }
                if cur[axis] < hi[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = lo[axis];
                axis += 1;
            }
        }
    }

    /// The `k` nearest indexed points to `p`, nearest first, ties broken by
    /// lower index. `exclude` removes one index (the query vertex itself).
    pub fn nearest(&self, p: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let available = self.len() - usize::from(exclude.is_some_and(|e| e < self.len()));
        let k = k.min(available);
        if k == 0 {
            return Vec::new();
        }
        let center = self.cell_of(p);
        let max_shell = self
            .shape
            .iter()
            .zip(&center)
            .map(|(s, c)| (*c).max(s - 1 - c))
            .max()
            .unwrap_or(0);
        let mut cand: Vec<Candidate> = Vec::with_capacity(4 * k);
        let mut lo = center.clone();
        let mut hi = center.clone();
        for shell in 0..=max_shell {
            for i in 0..self.dim {
                lo[i] = center[i].saturating_sub(shell);
                hi[i] = (center[i] + shell).min(self.shape[i] - 1);
            }
            self.for_cells(&lo, &hi, &center, shell, |cell| {
                cand.extend(
                    self.cell_entries(cell)
                        .iter()
                        .filter(|&&idx| Some(idx) != exclude)
                        .map(|&idx| Candidate {
                            d2: dist_sq(p, self.point(idx)),
                            idx,
                        }),
                );
            });
            if cand.len() >= k {
                // everything past index k-1 is no better than the k-th
                cand.select_nth_unstable(k - 1);
                cand.truncate(k);
                let reach = self.block_clearance(p, &center, shell);
                let worst = cand.iter().map(|c| c.d2).fold(f64::NEG_INFINITY, f64::max);
                if worst < reach * reach * (1.0 - 1e-9) {
                    break;
                }
            }
        }
        cand.sort_unstable();
        cand.into_iter().map(|c| (c.idx, c.d2.sqrt())).collect()
    }

    /// Distance from `p` to the outside of the block of cells within
    /// Chebyshev radius `shell` of `center`; infinite along grid edges.
    fn block_clearance(&self, p: &[f64], center: &[usize], shell: usize) -> f64 {
        let mut reach = f64::INFINITY;
        for i in 0..self.dim {
            if center[i] > shell {
                let lo = self.origin[i] + (center[i] - shell) as f64 * self.cell_size[i];
                reach = reach.min(p[i] - lo);
            }
            if center[i] + shell + 1 < self.shape[i] {
                let hi = self.origin[i] + (center[i] + shell + 1) as f64 * self.cell_size[i];
                reach = reach.min(hi - p[i]);
            }
        }
        reach
    }

    /// All indexed points within distance `r` of `p` (inclusive), by index.
    pub fn within_radius(&self, p: &[f64], r: f64) -> Vec<usize> {
        if self.is_empty() || r < 0.0 {
            return Vec::new();
        }
        let lo = self.cell_of(&p.iter().map(|x| x - r).collect::<Vec<_>>());
        let hi = self.cell_of(&p.iter().map(|x| x + r).collect::<Vec<_>>());
        let r2 = r * r;
        let mut out = Vec::new();
        self.for_cells(&lo, &hi, &lo, 0, |cell| {
            out.extend(
                self.cell_entries(cell)
                    .iter()
                    .copied()
                    .filter(|&idx| dist_sq(p, self.point(idx)) <= r2),
            );
        });
        out.sort_unstable();
        out
    }

    /// `min_v ‖v − nn_k(v)‖` over all indexed points, neighbors excluding `v`.
    pub fn min_kth_neighbor_distance(&self, k: usize) -> Option<f64> {
        if k == 0 || self.len() <= k {
            return None;
        }
        (0..self.len())
            .map(|i| self.nearest(self.point(i), k, Some(i))[k - 1].1)
            .min_by(f64::total_cmp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[Vec<f64>], p: &[f64], k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, q)| (dist_sq(p, q), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn collinear_nearest() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![3.0, 0.0]];
        let idx = GridIndex::build(2, &pts);
        assert_eq!(idx.nearest(&[1.0, 0.0], 1, Some(1))[0].0, 0);
        assert_eq!(idx.nearest(&[1.0, 0.0], 10, None).len(), 3);
    }

    #[test]
    fn zero_radius_finds_duplicates_only() {
        let pts = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.50001]];
        let idx = GridIndex::build(2, &pts);
        assert_eq!(idx.within_radius(&[0.5, 0.5], 0.0), vec![0, 1]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2, 3, 5] {
            let pts: Vec<Vec<f64>> = (0..10_000)
                .map(|_| {
                    (0..dim)
                        .map(|_| rng.gen::<f64>() * if dim == 2 { 3.0 } else { 1.0 })
                        .collect()
                })
                .collect();
            let idx = GridIndex::build(dim, &pts);
            for _ in 0..100 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 1.2 - 0.1).collect();
                let k = rng.gen_range(1..40);
                let got: Vec<usize> = idx.nearest(&q, k, None).into_iter().map(|(i, _)| i).collect();
                assert_eq!(got, brute_nearest(&pts, &q, k));
                let r = rng.gen::<f64>() * 0.1;
                let want: Vec<usize> = (0..pts.len()).filter(|&i| dist_sq(&q, &pts[i]) <= r * r).collect();
                assert_eq!(idx.within_radius(&q, r), want);
            }
        }
    }

    #[test]
    fn min_kth_distance_small_cases() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let idx = GridIndex::build(1, &pts);
        assert_eq!(idx.min_kth_neighbor_distance(2), Some(1.0));
        assert_eq!(idx.min_kth_neighbor_distance(3), None);
        let dup = vec![vec![0.0], vec![0.0], vec![5.0]];
        assert_eq!(GridIndex::build(1, &dup).min_kth_neighbor_distance(1), Some(0.0));
    }
}
