use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spatial::GridIndex;
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, Environment, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionStrategy {
    Radius(f64),
    Knn(usize),
}

impl ConnectionStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConnectionStrategy::Radius(r) if !(r > 0.0 && r.is_finite()) => Err(Error::validation(format!(
                "connection radius must be positive, got {r}"
            ))),
            ConnectionStrategy::Knn(0) => Err(Error::validation("K must be >= 1")),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ConnectionStrategy::Radius(_) => "radius".to_string(),
            ConnectionStrategy::Knn(k) => format!("knn{k}"),
        }
    }
}

/// Position in a seeded ChaCha8 sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamState {
    pub seed: u64,
    pub word_pos: u64,
}

impl StreamState {
    pub fn fresh(seed: u64) -> Self {
        StreamState { seed, word_pos: 0 }
    }

    fn resume(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_word_pos(self.word_pos as u128);
        rng
    }

    fn capture(seed: u64, rng: &ChaCha8Rng) -> Self {
        StreamState {
            seed,
            word_pos: u64::try_from(rng.get_word_pos()).expect("stream position fits in u64"),
        }
    }
}

/// A probabilistic roadmap: sampled vertices, undirected collision-free
/// edges, the strategy that produced them, and where the sample stream stopped.
#[derive(Debug, Clone)]
pub struct PrmGraph {
    dim: usize,
    vertices: Vec<Point>,
    adjacency: Vec<Vec<usize>>,
    strategy: ConnectionStrategy,
    rng_state: StreamState,
    index: GridIndex,
}

impl PartialEq for PrmGraph {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.vertices == other.vertices
            && self.adjacency == other.adjacency
            && self.strategy == other.strategy
            && self.rng_state == other.rng_state
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    dim: usize,
    vertices: Vec<Point>,
    edges: Vec<(usize, usize)>,
    strategy: ConnectionStrategy,
    rng_state: StreamState,
}

/// Sorted adjacency lists for an undirected edge list without duplicates.
fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut degree = vec![0usize; n];
    for &(u, v) in edges {
        degree[u] += 1;
        degree[v] += 1;
    }
    let mut adjacency: Vec<Vec<usize>> = degree.into_iter().map(Vec::with_capacity).collect();
    for &(u, v) in edges {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    adjacency
}

/// Grows `prev` (or an empty roadmap) to exactly `n_total` vertices drawn
/// from the stream seeded by `seed`, then connects them.
///
/// Radius roadmaps keep every existing edge and only test pairs involving a
/// new vertex. KNN adjacency is recomputed, since neighbor sets shift as
/// vertices are added.
pub fn construct(
    env: &Environment,
    n_total: usize,
    strategy: ConnectionStrategy,
    seed: u64,
    prev: Option<PrmGraph>,
) -> Result<PrmGraph> {
    strategy.validate()?;
    let (mut vertices, mut adjacency, state) = match prev {
        Some(g) => {
            if g.strategy != strategy {
                return Err(Error::validation("strategy differs from the previous roadmap"));
            }
            if g.dim != env.dim() {
                return Err(Error::DimensionMismatch {
                    expected: env.dim(),
                    got: g.dim,
                });
            }
            if g.rng_state.seed != seed {
                return Err(Error::validation("seed differs from the previous roadmap's stream"));
            }
            if n_total < g.vertices.len() {
                return Err(Error::validation(format!(
                    "cannot shrink roadmap from {} to {n_total} vertices",
                    g.vertices.len()
                )));
            }
            (g.vertices, g.adjacency, g.rng_state)
        }
        None => (Vec::new(), Vec::new(), StreamState::fresh(seed)),
    };

    let n_old = vertices.len();
    let mut rng = state.resume();
    vertices.extend((n_old..n_total).map(|_| env.sample_uniform(&mut rng)));
    let rng_state = StreamState::capture(seed, &rng);
    let index = GridIndex::build(env.dim(), &vertices);

    match strategy {
        ConnectionStrategy::Radius(r) => {
            adjacency.resize(n_total, Vec::new());
            let new_edges: Vec<(usize, usize)> = (n_old..n_total)
                .into_par_iter()
                .flat_map_iter(|v| {
                    let index = &index;
                    let vertices = &vertices;
                    index
                        .within_radius(&vertices[v], r)
                        .into_iter()
                        .filter(move |&u| u < v && env.segment_free_unchecked(&vertices[u], &vertices[v]))
                        .map(move |u| (u, v))
                })
                .collect();
            for (u, v) in new_edges {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
            for list in &mut adjacency {
                list.sort_unstable();
            }
        }
        ConnectionStrategy::Knn(k) => {
            let knn: Vec<Vec<usize>> = (0..n_total)
                .into_par_iter()
                .map(|v| {
                    index
                        .nearest(&vertices[v], k, Some(v))
                        .into_iter()
                        .map(|(u, _)| u)
                        .collect()
                })
                .collect();
            // each undirected pair is emitted once: by its lower endpoint if
            // that endpoint lists the other, else by the higher one
            let edges: Vec<(usize, usize)> = (0..n_total)
                .into_par_iter()
                .flat_map_iter(|v| {
                    let knn = &knn;
                    let vertices = &vertices;
                    knn[v]
                        .iter()
                        .copied()
                        .filter(move |&u| u > v || !knn[u].contains(&v))
                        .filter(move |&u| env.segment_free_unchecked(&vertices[u], &vertices[v]))
                        .map(move |u| (u.min(v), u.max(v)))
                })
                .collect();
            adjacency = adjacency_from_edges(n_total, &edges);
        }
    }

    Ok(PrmGraph {
        dim: env.dim(),
        vertices,
        adjacency,
        strategy,
        rng_state,
        index,
    })
}

impl PrmGraph {
    /// Builds a roadmap over caller-supplied vertices (e.g. a lattice), with
    /// a stream state that marks no samples drawn.
    pub fn from_vertices(env: &Environment, vertices: Vec<Point>, strategy: ConnectionStrategy) -> Result<Self> {
        strategy.validate()?;
        for v in &vertices {
            if !env.contains(v)? {
                return Err(Error::validation("vertex outside the environment"));
            }
        }
        let n = vertices.len();
        let index = GridIndex::build(env.dim(), &vertices);
        let mut pairs: Vec<(usize, usize)> = match strategy {
            ConnectionStrategy::Radius(r) => (0..n)
                .flat_map(|v| {
                    index
                        .within_radius(&vertices[v], r)
                        .into_iter()
                        .filter(move |&u| u < v)
                        .map(move |u| (u, v))
                })
                .collect(),
            ConnectionStrategy::Knn(k) => (0..n)
                .flat_map(|v| {
                    index
                        .nearest(&vertices[v], k, Some(v))
                        .into_iter()
                        .map(move |(u, _)| (u.min(v), u.max(v)))
                })
                .collect(),
        };
        pairs.sort_unstable();
        pairs.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in pairs {
            if env.segment_free_unchecked(&vertices[u], &vertices[v]) {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(PrmGraph {
            dim: env.dim(),
            vertices,
            adjacency,
            strategy,
            rng_state: StreamState::fresh(0),
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn strategy(&self) -> ConnectionStrategy {
        self.strategy
    }

    pub fn rng_state(&self) -> StreamState {
        self.rng_state
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Undirected edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    /// The `k` nearest vertices to `p` (exact, ties by lower index).
    pub fn nearest_neighbors(&self, p: &[f64], k: usize) -> Vec<usize> {
        self.index.nearest(p, k, None).into_iter().map(|(i, _)| i).collect()
    }

    /// Vertices within distance `r` of `p`, by index.
    pub fn within_radius(&self, p: &[f64], r: f64) -> Vec<usize> {
        self.index.within_radius(p, r)
    }

    /// `min_v ‖v − nn_{K+1}(v)‖` for a `Knn(K)` roadmap. Every smaller radius
    /// is a connection radius of the graph; this value itself is not.
    pub fn min_k1_distance(&self) -> Result<f64> {
        let k = match self.strategy {
            ConnectionStrategy::Knn(k) => k,
            ConnectionStrategy::Radius(_) => return Err(Error::validation("min_k1_distance needs a KNN roadmap")),
        };
        if self.len() <= k + 1 {
            return Err(Error::validation(format!(
                "need more than K+1 = {} vertices, have {}",
                k + 1,
                self.len()
            )));
        }
        Ok(self.index.min_kth_neighbor_distance(k + 1).expect("enough vertices"))
    }

    fn connectors(&self, env: &Environment, x: &[f64]) -> Vec<(usize, f64)> {
        let near = match self.strategy {
            ConnectionStrategy::Radius(r) => self.index.within_radius(x, r),
            ConnectionStrategy::Knn(k) => self.nearest_neighbors(x, k),
        };
        near.into_iter()
            .filter(|&u| env.segment_free_unchecked(x, &self.vertices[u]))
            .map(|u| (u, dist_sq(x, &self.vertices[u]).sqrt()))
            .collect()
    }

    /// Connects `start` and `goal` to the roadmap with the roadmap's own
    /// strategy and runs Dijkstra. The roadmap is not modified; connection
    /// edges live only for this query.
    pub fn query(&self, env: &Environment, start: &Point, goal: &Point) -> Result<Option<Vec<Point>>> {
        if !env.contains(start)? || !env.contains(goal)? {
            return Err(Error::validation("query endpoints must lie in free space"));
        }
        if start == goal {
            return Ok(Some(vec![start.clone()]));
        }
        let n = self.len();
        let source = n;
        let target = n + 1;
        let from_start = self.connectors(env, start);
        let mut to_goal = self.connectors(env, goal);
        to_goal.sort_by_key(|&(u, _)| u);
        if from_start.is_empty() || to_goal.is_empty() {
            return Ok(None);
        }

        let mut dist = vec![f64::INFINITY; n + 2];
        let mut prev = vec![usize::MAX; n + 2];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Reverse((OrdF64(0.0), source)));

        while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == target {
                break;
            }
            let mut relax = |v: usize, w: f64, heap: &mut BinaryHeap<Reverse<(OrdF64, usize)>>| {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                    heap.push(Reverse((OrdF64(nd), v)));
                }
            };
            if u == source {
                for &(v, w) in &from_start {
                    relax(v, w, &mut heap);
                }
                continue;
            }
            for &v in &self.adjacency[u] {
                let w = dist_sq(&self.vertices[u], &self.vertices[v]).sqrt();
                relax(v, w, &mut heap);
            }
            if let Ok(pos) = to_goal.binary_search_by_key(&u, |&(v, _)| v) {
                relax(target, to_goal[pos].1, &mut heap);
            }
        }

        if dist[target].is_infinite() {
            return Ok(None);
        }
        let mut path = vec![goal.clone()];
        let mut cur = prev[target];
        while cur != source {
            path.push(self.vertices[cur].clone());
            cur = prev[cur];
        }
        path.push(start.clone());
        path.reverse();
        Ok(Some(path))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphFile {
            dim: self.dim,
            vertices: self.vertices.clone(),
            edges: self.edges(),
            strategy: self.strategy,
            rng_state: self.rng_state,
        })
        .expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        file.strategy.validate()?;
        let n = file.vertices.len();
        if let Some(v) = file.vertices.iter().find(|v| v.dim() != file.dim) {
            return Err(Error::DimensionMismatch {
                expected: file.dim,
                got: v.dim(),
            });
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &file.edges {
            if u >= n || v >= n || u == v {
                return Err(Error::validation(format!("invalid edge ({u}, {v})")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let index = GridIndex::build(file.dim, &file.vertices);
        Ok(PrmGraph {
            dim: file.dim,
            vertices: file.vertices,
            adjacency,
            strategy: file.strategy,
            rng_state: file.rng_state,
            index,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
