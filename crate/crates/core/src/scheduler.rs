//! Skeleton-queue planning loop with adaptive, fixed and incremental sample
//! budgets.
//!
//! A skeleton is an ordered list of motion subproblems. Each subproblem owns
//! one roadmap that only ever grows, so effort from failed attempts carries
//! over. A failed query halves the subproblem's assumed clearance and failure
//! budget and sends the skeleton to the back of the queue.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{ball_measure, numerical_sample_bound, BallMeasure, BoundQuery};
use crate::error::{Error, Result};
use crate::geometry::{make_hallway, Environment, Point};
use crate::harness::{csv_error, finish_csv, fmt_sig, trial_seed};
use crate::prm::{construct, ConnectionStrategy, PrmGraph};

pub const DEFAULT_K: usize = 32;
pub const DEFAULT_DELTA_MIN: f64 = 1e-3;

/// Samples needed so a KNN roadmap finds a `delta`-clear path with
/// probability at least `1 − gamma` (net radius `delta / 2`).
pub fn compute_new_samples(free_volume: f64, delta: f64, gamma: f64, d: usize) -> Result<u64> {
    if !(free_volume > 0.0 && delta > 0.0 && gamma > 0.0) {
        return Err(Error::validation("free volume, delta and gamma must be positive"));
    }
    match ball_measure(d, delta / 2.0, free_volume)? {
        BallMeasure::FullCover => Ok(1),
        BallMeasure::Partial(p) => Ok(numerical_sample_bound(&BoundQuery::new(d, p, gamma)?)?.samples),
    }
}

/// Halves both the assumed clearance and the failure budget.
pub fn adjust_width_and_failure(delta: f64, gamma: f64) -> (f64, f64) {
    (delta / 2.0, gamma / 2.0)
}

#[derive(Debug, Clone)]
pub struct Subproblem {
    pub env: Environment,
    pub start: Point,
    pub goal: Point,
    pub delta: f64,
    pub gamma: f64,
    /// Seed of this subproblem's sample stream.
    pub stream_seed: u64,
    pub saved_graph: Option<PrmGraph>,
    pub path: Option<Vec<Point>>,
}

impl Subproblem {
    pub fn new(env: Environment, start: Point, goal: Point, delta: f64, gamma: f64, stream_seed: u64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::validation(format!("delta must be positive, got {delta}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::validation(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if !env.contains(&start)? || !env.contains(&goal)? {
            return Err(Error::validation("subproblem endpoints must lie in free space"));
        }
        Ok(Subproblem {
            env,
            start,
            goal,
            delta,
            gamma,
            stream_seed,
            saved_graph: None,
            path: None,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.saved_graph.as_ref().map_or(0, PrmGraph::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkeletonStatus {
    Pending,
    Solved,
    Pruned,
}

#[derive(Debug, Clone)]
pub struct Skeleton {
    pub subproblems: Vec<Subproblem>,
    pub attempts: u32,
    pub status: SkeletonStatus,
}

impl Skeleton {
    pub fn new(subproblems: Vec<Subproblem>) -> Self {
        Skeleton {
            subproblems,
            attempts: 0,
            status: SkeletonStatus::Pending,
        }
    }
}

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyConfig {
    /// Sample count from the clearance bound at the current `(δ, γ)`.
    Aprm {
        gamma: f64,
        #[serde(default = "default_k")]
        k: usize,
    },
    /// The same hand-picked count for every subproblem.
    Sprm {
        n_fixed: u64,
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Counts `m0, ⌈c·m0⌉, …` until a query succeeds or `n_max` is reached.
    Iprm {
        m0: u64,
        c: f64,
        n_max: u64,
        #[serde(default = "default_k")]
        k: usize,
    },
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StrategyConfig::Aprm { gamma, k } => gamma > 0.0 && gamma < 1.0 && k >= 1,
            StrategyConfig::Sprm { n_fixed, k } => n_fixed >= 1 && k >= 1,
            StrategyConfig::Iprm { m0, c, n_max, k } => m0 >= 1 && c > 1.0 && c.is_finite() && n_max >= m0 && k >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("invalid strategy {self:?}")))
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            StrategyConfig::Aprm { k, .. } | StrategyConfig::Sprm { k, .. } | StrategyConfig::Iprm { k, .. } => k,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            StrategyConfig::Aprm { gamma, .. } => format!("aprm(gamma={})", fmt_sig(gamma)),
            StrategyConfig::Sprm { n_fixed, .. } => format!("sprm(n={n_fixed})"),
            StrategyConfig::Iprm { m0, c, n_max, .. } => format!("iprm(m0={m0} c={} n={n_max})", fmt_sig(c)),
        }
    }
}

/// `m0, ⌈c·m0⌉, ⌈c·⌈c·m0⌉⌉, …`, capped at and ending with `n_max`.
pub fn iprm_schedule(m0: u64, c: f64, n_max: u64) -> Vec<u64> {
    let mut out = vec![m0.min(n_max)];
    let mut m = m0;
    while m < n_max {
        let x = c * m as f64;
        // products like 1.1 · 110 land a hair above the integer
        let next = if (x - x.round()).abs() <= 1e-9 * x {
            x.round()
        } else {
            x.ceil()
        };
        m = (next as u64).max(m + 1);
        out.push(m.min(n_max));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub delta_min: f64,
    /// Prunes a skeleton rather than grow any roadmap past this size.
    pub sample_cap: Option<u64>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            delta_min: DEFAULT_DELTA_MIN,
            sample_cap: None,
        }
    }
}

/// One grow-and-query step on one subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub skeleton: usize,
    pub subproblem: usize,
    pub delta: f64,
    pub gamma: f64,
    pub vertices_before: usize,
    pub vertices_after: usize,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    /// Index of the first skeleton solved, if any.
    pub solved: Option<usize>,
    pub skeletons: Vec<Skeleton>,
    pub log: Vec<AttemptRecord>,
    pub queue_pops: u64,
    pub requeues: u64,
}

impl PlanResult {
    /// Paths of the solved skeleton, one per subproblem.
    pub fn paths(&self) -> Option<Vec<&[Point]>> {
        let s = &self.skeletons[self.solved?];
        s.subproblems.iter().map(|sp| sp.path.as_deref()).collect()
    }

    /// Sum of vertices added across every roadmap construction.
    pub fn total_samples(&self) -> u64 {
        self.log
            .iter()
            .map(|a| (a.vertices_after - a.vertices_before) as u64)
            .sum()
    }
}

enum Outcome {
    Solved,
    Failed,
    OverBudget,
}

/// Runs a subproblem's strategy once at its current `(δ, γ)`.
fn attempt(
    sp: &mut Subproblem,
    strategy: &StrategyConfig,
    opts: &PlanOptions,
    ids: (usize, usize),
    log: &mut Vec<AttemptRecord>,
) -> Result<Outcome> {
    let targets: Vec<u64> = match *strategy {
        StrategyConfig::Aprm { .. } => vec![compute_new_samples(sp.env.volume(), sp.delta, sp.gamma, sp.env.dim())?],
        StrategyConfig::Sprm { n_fixed, .. } => vec![n_fixed],
        StrategyConfig::Iprm { m0, c, n_max, .. } => iprm_schedule(m0, c, n_max),
    };
    let conn = ConnectionStrategy::Knn(strategy.k());
    let mut tried_at: Option<usize> = None;
    for target in targets {
        let have = sp.vertex_count();
        let n = (target as usize).max(have);
        // a roadmap already queried at this size gives the same answer
        if tried_at == Some(n) || (tried_at.is_none() && n == have && log_has_tried(log, ids, n)) {
            continue;
        }
        if opts.sample_cap.is_some_and(|cap| n as u64 > cap) {
            return Ok(Outcome::OverBudget);
        }
        let graph = construct(&sp.env, n, conn, sp.stream_seed, sp.saved_graph.take())?;
        let path = graph.query(&sp.env, &sp.start, &sp.goal)?;
        log.push(AttemptRecord {
            skeleton: ids.0,
            subproblem: ids.1,
            delta: sp.delta,
            gamma: sp.gamma,
            vertices_before: have,
            vertices_after: n,
            success: path.is_some(),
        });
        sp.saved_graph = Some(graph);
        tried_at = Some(n);
        if let Some(path) = path {
            sp.path = Some(path);
            return Ok(Outcome::Solved);
        }
    }
    Ok(Outcome::Failed)
}

fn log_has_tried(log: &[AttemptRecord], ids: (usize, usize), n: usize) -> bool {
    log.iter()
        .any(|a| a.skeleton == ids.0 && a.subproblem == ids.1 && a.vertices_after == n)
}

/// FIFO skeleton queue. A failed subproblem halves its `(δ, γ)`, clamping
/// δ at `delta_min`; a failure already at `delta_min` prunes the skeleton.
/// Solved subproblems keep their paths across re-queues.
pub fn tamp_plan(skeletons: Vec<Skeleton>, strategy: &StrategyConfig, opts: &PlanOptions) -> Result<PlanResult> {
    strategy.validate()?;
    if skeletons.is_empty() {
        return Err(Error::validation("need at least one skeleton"));
    }
    if !(opts.delta_min > 0.0) {
        return Err(Error::validation("delta_min must be positive"));
    }
    let mut skeletons = skeletons;
    let mut queue: VecDeque<usize> = (0..skeletons.len()).collect();
    let mut log = Vec::new();
    let mut queue_pops = 0;
    let mut requeues = 0;

    while let Some(si) = queue.pop_front() {
        queue_pops += 1;
        let skeleton = &mut skeletons[si];
        skeleton.attempts += 1;
        let mut failed = None;
        for (pi, sp) in skeleton.subproblems.iter_mut().enumerate() {
            if sp.path.is_some() {
                continue;
            }
            match attempt(sp, strategy, opts, (si, pi), &mut log)? {
                Outcome::Solved => {}
                other => {
                    failed = Some((pi, other));
                    break;
                }
            }
        }
        match failed {
            None => {
                skeleton.status = SkeletonStatus::Solved;
                return Ok(PlanResult {
                    solved: Some(si),
                    skeletons,
                    log,
                    queue_pops,
                    requeues,
                });
            }
            Some((_, Outcome::OverBudget)) => skeleton.status = SkeletonStatus::Pruned,
            Some((pi, _)) => {
                let sp = &mut skeleton.subproblems[pi];
                if sp.delta <= opts.delta_min {
                    skeleton.status = SkeletonStatus::Pruned;
                } else {
                    let (delta, gamma) = adjust_width_and_failure(sp.delta, sp.gamma);
                    sp.delta = delta.max(opts.delta_min);
                    sp.gamma = gamma;
                    queue.push_back(si);
                    requeues += 1;
                }
            }
        }
    }
    Ok(PlanResult {
        solved: None,
        skeletons,
        log,
        queue_pops,
        requeues,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HallwayShape {
    pub d: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Count(n) => (0..*n).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }
}

fn default_delta_min() -> f64 {
    DEFAULT_DELTA_MIN
}

fn default_initial_gamma() -> f64 {
    0.1
}

/// A seeded family of carry-through-the-hallway tasks. Each instance draws an
/// object count and radii; carrying object `i` is a subproblem on a hallway
/// whose clearance is `half_width − (robot_radius + radius_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub robot_radius: f64,
    pub object_radius_range: (f64, f64),
    pub object_count_range: (u32, u32),
    pub hallway: HallwayShape,
    pub strategies: Vec<StrategyConfig>,
    pub seeds: SeedSpec,
    #[serde(default = "default_delta_min")]
    pub delta_min: f64,
    /// Starting failure budget for strategies without their own.
    #[serde(default = "default_initial_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub sample_cap: Option<u64>,
    #[serde(default)]
    pub record_timing: bool,
}

impl TaskSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TaskSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (r_lo, r_hi) = self.object_radius_range;
        let (c_lo, c_hi) = self.object_count_range;
        if !(self.robot_radius >= 0.0) {
            return Err(Error::validation("robot_radius: must be non-negative"));
        }
        if !(r_lo >= 0.0 && r_lo <= r_hi) {
            return Err(Error::validation("object_radius_range: need 0 <= lo <= hi"));
        }
        if !(c_lo >= 1 && c_lo <= c_hi) {
            return Err(Error::validation("object_count_range: need 1 <= lo <= hi"));
        }
        if self.hallway.d < 2 {
            return Err(Error::validation("hallway.d: must be >= 2"));
        }
        if !(self.hallway.half_width > 0.0 && self.hallway.half_width < 0.5) {
            return Err(Error::validation("hallway.half_width: must lie in (0, 0.5)"));
        }
        if self.min_clearance() <= 0.0 {
            return Err(Error::validation(
                "hallway.half_width: the largest object leaves no clearance",
            ));
        }
        if !(self.delta_min > 0.0) {
            return Err(Error::validation("delta_min: must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation("gamma: must lie in (0, 1)"));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::validation(format!("strategies[{i}]: {e}")))?;
        }
        Ok(())
    }

    /// Clearance left by the largest admissible object.
    pub fn min_clearance(&self) -> f64 {
        self.hallway.half_width - (self.robot_radius + self.object_radius_range.1)
    }

    /// Clearances of the subproblems of task `seed`, in order.
    pub fn clearances(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, u64::MAX));
        let (c_lo, c_hi) = self.object_count_range;
        let (r_lo, r_hi) = self.object_radius_range;
        let count = rng.gen_range(c_lo..=c_hi);
        (0..count)
            .map(|_| {
                let r = if r_lo < r_hi { rng.gen_range(r_lo..=r_hi) } else { r_lo };
                self.hallway.half_width - (self.robot_radius + r)
            })
            .collect()
    }

    /// Pick and place configurations of task `seed`: one uniform point in
    /// the left room and one in the right room per object.
    pub fn endpoints(&self, seed: u64) -> Vec<(Point, Point)> {
        let d = self.hallway.d;
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, u64::MAX - 1));
        let mut room_point = |x0: f64| {
            let mut c: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
            c[0] += x0;
            Point::new(c)
        };
        (0..self.clearances(seed).len())
            .map(|_| (room_point(-1.0), room_point(1.0)))
            .collect()
    }

    /// One skeleton carrying each object from the left room to the right.
    /// Stream seeds depend only on `(seed, object index)`, so every strategy
    /// sees the same samples.
    pub fn instance(&self, seed: u64, initial_gamma: f64) -> Result<Skeleton> {
        let d = self.hallway.d;
        let subproblems = self
            .clearances(seed)
            .into_iter()
            .zip(self.endpoints(seed))
            .enumerate()
            .map(|(i, (delta, (start, goal)))| {
                Subproblem::new(
                    make_hallway(d, delta)?,
                    start,
                    goal,
                    delta,
                    initial_gamma,
                    trial_seed(seed, i as u64),
                )
            })
            .collect::<Result<_>>()?;
        Ok(Skeleton::new(subproblems))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub seed: u64,
    pub success: bool,
    pub total_samples: u64,
    pub seconds: Option<f64>,
}

pub const COMPARISON_HEADER: [&str; 5] = ["strategy", "seed", "success", "total_samples", "seconds"];

/// Plans every seeded task instance with every strategy.
pub fn compare_strategies(spec: &TaskSpec) -> Result<Vec<ComparisonRow>> {
    spec.validate()?;
    let opts = PlanOptions {
        delta_min: spec.delta_min,
        sample_cap: spec.sample_cap,
    };
    let seeds = spec.seeds.seeds();
    let mut rows = Vec::with_capacity(spec.strategies.len() * seeds.len());
    for strategy in &spec.strategies {
        let gamma = match *strategy {
            StrategyConfig::Aprm { gamma, .. } => gamma,
            _ => spec.gamma,
        };
        let batch: Vec<ComparisonRow> = seeds
            .par_iter()
            .map(|&seed| {
                let t0 = Instant::now();
                let result = tamp_plan(vec![spec.instance(seed, gamma)?], strategy, &opts)?;
                Ok(ComparisonRow {
                    strategy: strategy.label(),
                    seed,
                    success: result.solved.is_some(),
                    total_samples: result.total_samples(),
                    seconds: spec.record_timing.then(|| t0.elapsed().as_secs_f64()),
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(batch);
    }
    Ok(rows)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COMPARISON_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.seed.to_string(),
            u8::from(r.success).to_string(),
            r.total_samples.to_string(),
            r.seconds.map(fmt_sig).unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    finish_csv(w)
}
