//! Seeded Monte Carlo experiments over hallway environments.
//!
//! Every report is a pure function of its configuration and master seed.
//! Trial `i` draws from the stream seeded by [`trial_seed`]`(master, i)`, so
//! adding trials never reshuffles earlier ones and execution order is
//! irrelevant.

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, ball_measure, clearance_to_net_radius, BallMeasure, BoundQuery};
use crate::error::{Error, Result};
use crate::geometry::{hallway_query, make_hallway, Environment, Point};
use crate::knnradius::{numerical_radius_bound, RadiusQuery, RatioRow};
use crate::prm::{construct, ConnectionStrategy, GridIndex};

/// SplitMix64 finalizer over `(master, index)`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSpec {
    Hallway { d: usize, delta: f64 },
    File { path: PathBuf },
    Inline(Environment),
}

impl EnvSpec {
    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvSpec::Hallway { d, delta } => make_hallway(*d, *delta),
            EnvSpec::File { path } => Environment::from_json(&std::fs::read_to_string(path)?),
            EnvSpec::Inline(env) => Ok(env.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub env: EnvSpec,
    pub n_samples: usize,
    pub strategy: ConnectionStrategy,
    pub trials: u32,
    pub master_seed: u64,
    /// Defaults to the hallway query along the first axis.
    #[serde(default)]
    pub query: Option<(Point, Point)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub success: bool,
    pub build_seconds: f64,
    pub query_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub successes: u32,
    pub trials: u32,
    pub p_hat: f64,
    pub wall_time_per_trial: f64,
    pub per_trial: Vec<TrialOutcome>,
}

impl TrialReport {
    /// `(seed, success)` per trial; the timing-free part of the report.
    pub fn outcomes(&self) -> Vec<(u64, bool)> {
        self.per_trial.iter().map(|t| (t.seed, t.success)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Builds one roadmap per trial and reports how often it answers the query.
pub fn mc_success_estimate(cfg: &McConfig) -> Result<TrialReport> {
    mc_success_estimate_with(cfg, Execution::Parallel)
}

pub fn mc_success_estimate_with(cfg: &McConfig, execution: Execution) -> Result<TrialReport> {
    if cfg.trials == 0 {
        return Err(Error::validation("trials must be >= 1"));
    }
    if cfg.n_samples == 0 {
        return Err(Error::validation("n_samples must be >= 1"));
    }
    cfg.strategy.validate()?;
    let env = cfg.env.build()?;
    let (start, goal) = match &cfg.query {
        Some(q) => q.clone(),
        None => hallway_query(env.dim()),
    };
    if !env.contains(&start)? || !env.contains(&goal)? {
        return Err(Error::validation("query endpoints must lie in free space"));
    }

    let run = |trial: u32| -> Result<TrialOutcome> {
        let seed = trial_seed(cfg.master_seed, trial as u64);
        let t0 = Instant::now();
        let graph = construct(&env, cfg.n_samples, cfg.strategy, seed, None)?;
        let t1 = Instant::now();
        let success = graph.query(&env, &start, &goal)?.is_some();
        Ok(TrialOutcome {
            seed,
            success,
            build_seconds: (t1 - t0).as_secs_f64(),
            query_seconds: t1.elapsed().as_secs_f64(),
        })
    };
    let per_trial: Vec<TrialOutcome> = match execution {
        Execution::Serial => (0..cfg.trials).map(run).collect::<Result<_>>()?,
        Execution::Parallel => (0..cfg.trials).into_par_iter().map(run).collect::<Result<_>>()?,
    };

    let successes = per_trial.iter().filter(|t| t.success).count() as u32;
    let total_time: f64 = per_trial.iter().map(|t| t.build_seconds + t.query_seconds).sum();
    Ok(TrialReport {
        successes,
        trials: cfg.trials,
        p_hat: successes as f64 / cfg.trials as f64,
        wall_time_per_trial: total_time / cfg.trials as f64,
        per_trial,
    })
}

/// Upper limit on verification grid points, to keep a coarse call from
/// silently allocating gigabytes.
pub const NET_CHECK_MAX_POINTS: u64 = 50_000_000;

/// Conservative α-net certificate.
///
/// Each box is covered by cell centers of a grid with spacing at most
/// `grid_pitch`, so every free point is within `h = grid_pitch·√d/2` of some
/// grid point. If every grid point has a sample within `alpha − h`, every
/// free point has one within `alpha`. A `false` result does not prove the
/// samples fail to be a net.
pub fn net_check<P: AsRef<[f64]> + Sync>(
    samples: &[P],
    env: &Environment,
    alpha: f64,
    grid_pitch: f64,
) -> Result<bool> {
    let d = env.dim();
    if !(alpha > 0.0 && grid_pitch > 0.0) {
        return Err(Error::validation("alpha and grid_pitch must be positive"));
    }
    let slack = grid_pitch * (d as f64).sqrt() / 2.0;
    if slack >= alpha {
        return Err(Error::validation(format!(
            "grid pitch {grid_pitch} too coarse for alpha {alpha}: need pitch * sqrt(d) / 2 < alpha"
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: s.as_ref().len(),
        });
    }
    if samples.is_empty() {
        return Ok(false);
    }

    let mut grids = Vec::with_capacity(env.boxes().len());
    let mut total: u64 = 0;
    for b in env.boxes() {
        let counts: Vec<u64> = (0..d)
            .map(|i| ((b.hi()[i] - b.lo()[i]) / grid_pitch).ceil().max(1.0) as u64)
            .collect();
        let n = counts.iter().try_fold(1_u64, |acc, &c| acc.checked_mul(c));
        total = n.and_then(|n| total.checked_add(n)).unwrap_or(u64::MAX);
        if total > NET_CHECK_MAX_POINTS {
            return Err(Error::validation(format!(
                "net check would need more than {NET_CHECK_MAX_POINTS} grid points; use a coarser pitch"
            )));
        }
        grids.push(counts);
    }

    let index = GridIndex::build(d, samples);
    let reach_sq = (alpha - slack) * (alpha - slack);
    let covered = env.boxes().iter().zip(&grids).all(|(b, counts)| {
        let n: u64 = counts.iter().product();
        (0..n).into_par_iter().all(|flat| {
            let mut rest = flat;
            let p: Vec<f64> = (0..d)
                .map(|i| {
                    let c = counts[i];
                    let j = rest % c;
                    rest /= c;
                    let step = (b.hi()[i] - b.lo()[i]) / c as f64;
                    b.lo()[i] + (j as f64 + 0.5) * step
                })
                .collect();
            let nearest = index.nearest(&p, 1, None);
            nearest[0].1 * nearest[0].1 <= reach_sq
        })
    });
    Ok(covered)
}

/// `n` uniform samples of `env` from the stream seeded by `seed`.
pub fn uniform_samples(env: &Environment, n: u64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| env.sample_uniform(&mut rng)).collect()
}

/// Default verification pitch for a given net radius.
pub fn default_net_pitch(alpha: f64) -> f64 {
    alpha / 8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRadiusSummary {
    pub d: usize,
    pub k: u64,
    pub n: u64,
    pub gamma: f64,
    /// Numerical KNN connection radius for the unit cube at `gamma`.
    pub bound: Option<f64>,
    pub min_k1_distances: Vec<f64>,
    pub median: f64,
    /// Fraction of trials whose empirical distance exceeds `bound`.
    pub exceed_fraction: Option<f64>,
}

/// Samples `n` uniform points in `[0,1]^d` per trial and records the minimum
/// distance from any point to its `(K+1)`-th nearest neighbor.
pub fn knn_radius_empirical(
    d: usize,
    k: u64,
    n: u64,
    trials: u32,
    master_seed: u64,
    gamma: f64,
) -> Result<KnnRadiusSummary> {
    if n <= k + 1 {
        return Err(Error::validation(format!("need n > K + 1, got n={n}, K={k}")));
    }
    if trials == 0 {
        return Err(Error::validation("trials must be >= 1"));
    }
    let env = Environment::unit_cube(d)?;
    let r_max = env.default_r_max();
    let bound = numerical_radius_bound(&RadiusQuery {
        k,
        n,
        gamma,
        dim: d,
        free_volume: 1.0,
        r_max,
        eps: r_max * 1e-9,
    })?
    .radius;

    let min_k1_distances: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(master_seed, t as u64));
            let pts: Vec<Point> = (0..n).map(|_| env.sample_uniform(&mut rng)).collect();
            GridIndex::build(d, &pts)
                .min_kth_neighbor_distance(k as usize + 1)
                .expect("n > K + 1")
        })
        .collect();

    let mut sorted = min_k1_distances.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let exceed_fraction = bound.map(|b| min_k1_distances.iter().filter(|&&m| m > b).count() as f64 / trials as f64);
    Ok(KnnRadiusSummary {
        d,
        k,
        n,
        gamma,
        bound,
        min_k1_distances,
        median,
        exceed_fraction,
    })
}

/// Sample bound for a hallway-like environment at clearance `delta`, with
/// net radius `delta / 2`. Returns 1 when one ball covers the space.
pub fn hallway_bound(env: &Environment, delta: f64, gamma: f64) -> Result<u64> {
    match ball_measure(env.dim(), clearance_to_net_radius(delta), env.volume())? {
        BallMeasure::FullCover => Ok(1),
        BallMeasure::Partial(p) => Ok(bounds::numerical_sample_bound(&BoundQuery::new(env.dim(), p, gamma)?)?.samples),
    }
}

/// Connection rule for one table column. `Radius` without a value uses the
/// prescribed `2δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableStrategy {
    Knn(usize),
    Radius(Option<f64>),
}

impl TableStrategy {
    fn resolve(self, delta: f64) -> ConnectionStrategy {
        match self {
            TableStrategy::Knn(k) => ConnectionStrategy::Knn(k),
            TableStrategy::Radius(r) => ConnectionStrategy::Radius(r.unwrap_or(2.0 * delta)),
        }
    }
}

fn default_gamma() -> f64 {
    0.01
}

fn default_trials() -> u32 {
    100
}

/// Batch grid over hallway clearance, dimension, and sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub deltas: Vec<f64>,
    pub dims: Vec<usize>,
    pub n_values: Vec<usize>,
    pub strategies: Vec<TableStrategy>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub master_seed: u64,
    /// Failure probability for the `bound_samples` column.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// When false the `seconds` column is left empty and output is
    /// byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

impl TableSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TableSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &delta) in self.deltas.iter().enumerate() {
            if !(delta > 0.0 && delta < 0.5) {
                return Err(Error::validation(format!("deltas[{i}]: {delta} must lie in (0, 0.5)")));
            }
        }
        for (i, &d) in self.dims.iter().enumerate() {
            if d < 2 {
                return Err(Error::validation(format!("dims[{i}]: {d} must be >= 2")));
            }
        }
        for (i, &n) in self.n_values.iter().enumerate() {
            if n == 0 {
                return Err(Error::validation(format!("n_values[{i}]: must be >= 1")));
            }
        }
        for (i, s) in self.strategies.iter().enumerate() {
            let ok = match *s {
                TableStrategy::Knn(k) => k >= 1,
                TableStrategy::Radius(r) => r.is_none_or(|r| r > 0.0 && r.is_finite()),
            };
            if !ok {
                return Err(Error::validation(format!(
                    "strategies[{i}]: invalid connection parameter"
                )));
            }
        }
        if self.trials == 0 {
            return Err(Error::validation("trials: must be >= 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation(format!("gamma: {} must lie in (0, 1)", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub delta: f64,
    pub d: usize,
    pub n: usize,
    pub strategy: String,
    pub p_hat: f64,
    pub bound_samples: u64,
    pub seconds: Option<f64>,
}

pub const TABLE_HEADER: [&str; 7] = ["delta", "d", "n", "strategy", "p_hat", "bound_samples", "seconds"];

/// Runs every `(delta, d, n, strategy)` cell in declaration order.
pub fn run_table_rows(spec: &TableSpec) -> Result<Vec<TableRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut cell = 0_u64;
    for &delta in &spec.deltas {
        for &d in &spec.dims {
            let env = make_hallway(d, delta)?;
            let bound_samples = hallway_bound(&env, delta, spec.gamma)?;
            for &n in &spec.n_values {
                for &strategy in &spec.strategies {
                    let strategy = strategy.resolve(delta);
                    let t0 = Instant::now();
                    let report = mc_success_estimate(&McConfig {
                        env: EnvSpec::Inline(env.clone()),
                        n_samples: n,
                        strategy,
                        trials: spec.trials,
                        master_seed: trial_seed(spec.master_seed, cell),
                        query: None,
                    })?;
                    rows.push(TableRow {
                        delta,
                        d,
                        n,
                        strategy: strategy.label(),
                        p_hat: report.p_hat,
                        bound_samples,
                        seconds: spec.record_timing.then(|| t0.elapsed().as_secs_f64()),
                    });
                    cell += 1;
                }
            }
        }
    }
    Ok(rows)
}

pub fn table_csv(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            fmt_sig(r.delta),
            r.d.to_string(),
            r.n.to_string(),
            r.strategy.clone(),
            fmt_sig(r.p_hat),
            r.bound_samples.to_string(),
            r.seconds.map(fmt_sig).unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    finish_csv(w)
}

pub const RATIO_HEADER: [&str; 4] = ["n", "net_radius", "conn_radius", "ratio"];

/// Ratio sweep as CSV; missing values are empty fields.
pub fn ratio_csv(rows: &[RatioRow]) -> Result<String> {
    let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RATIO_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([r.n.to_string(), opt(r.net_radius), opt(r.conn_radius), opt(r.ratio)])
            .map_err(csv_error)?;
    }
    finish_csv(w)
}

pub const TRIAL_HEADER: [&str; 4] = ["seed", "success", "build_seconds", "query_seconds"];

/// One CSV row per Monte Carlo trial.
pub fn trials_csv(report: &TrialReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIAL_HEADER).map_err(csv_error)?;
    for t in &report.per_trial {
        w.write_record([
            t.seed.to_string(),
            t.success.to_string(),
            fmt_sig(t.build_seconds),
            fmt_sig(t.query_seconds),
        ])
        .map_err(csv_error)?;
    }
    finish_csv(w)
}

/// Parses a table spec and renders the full CSV.
pub fn run_table(spec_json: &str) -> Result<String> {
    table_csv(&run_table_rows(&TableSpec::from_json(spec_json)?)?)
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
