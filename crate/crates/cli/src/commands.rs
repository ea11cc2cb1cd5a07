use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use prmbound::bounds::{
    ball_measure, clearance_to_net_radius, closed_form_bound, numerical_sample_bound, BallMeasure, BoundQuery,
};
use prmbound::geometry::{make_hallway, Environment, Point};
use prmbound::harness::{
    self, default_net_pitch, knn_radius_empirical, mc_success_estimate, ratio_csv, run_table_rows, table_csv,
    trials_csv, uniform_samples, EnvSpec, McConfig, TableSpec,
};
use prmbound::knnradius::{closed_form_radius, numerical_radius_bound, ratio_diagnostic, RadiusQuery};
use prmbound::prm::ConnectionStrategy;
use prmbound::scheduler::{compare_strategies, comparison_csv, SeedSpec, TaskSpec};

use crate::Format;

/// Invalid flag combination caught before any library call.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

pub struct Context {
    pub seed: Option<u64>,
    pub format: Option<Format>,
}

impl Context {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_env(path: &Path) -> anyhow::Result<Environment> {
    Environment::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Numerical,
    ClosedForm,
}

/// Free space given as a file or as a hallway.
#[derive(Debug, Args)]
pub struct EnvArgs {
    /// Environment JSON file.
    #[arg(long, conflicts_with = "hallway")]
    env: Option<PathBuf>,

    /// Hallway dimension; its half-width is `--delta`.
    #[arg(long)]
    hallway: Option<usize>,
}

impl EnvArgs {
    fn build(&self, delta: Option<f64>) -> anyhow::Result<Option<Environment>> {
        match (&self.env, self.hallway) {
            (Some(path), _) => Ok(Some(load_env(path)?)),
            (None, Some(d)) => match delta {
                Some(delta) => Ok(Some(make_hallway(d, delta)?)),
                None => usage("--hallway needs --delta"),
            },
            (None, None) => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Failure probability γ.
    #[arg(long)]
    gamma: f64,

    /// Ball measure p; give with `--dim` instead of an environment.
    #[arg(long, requires = "dim")]
    p: Option<f64>,

    #[arg(long)]
    dim: Option<usize>,

    /// Path clearance δ; the net radius is δ/2.
    #[arg(long)]
    delta: Option<f64>,

    #[command(flatten)]
    env: EnvArgs,

    #[arg(long, value_enum, default_value_t = Method::Numerical)]
    method: Method,
}

#[derive(Debug, Serialize)]
struct BoundOutput {
    samples: u64,
    log_failure: Option<f64>,
    method: &'static str,
    p: f64,
    alpha: Option<f64>,
}

pub fn bound(ctx: &Context, a: BoundArgs) -> anyhow::Result<String> {
    let env = a.env.build(a.delta)?;
    let (dim, measure, alpha) = match (a.p, env, a.delta) {
        (Some(p), None, None) => (a.dim.expect("required by clap"), BallMeasure::Partial(p), None),
        (None, Some(env), Some(delta)) => {
            let alpha = clearance_to_net_radius(delta);
            (env.dim(), ball_measure(env.dim(), alpha, env.volume())?, Some(alpha))
        }
        _ => return usage("give either --p with --dim, or --delta with --env or --hallway"),
    };
    let out = match measure {
        BallMeasure::FullCover => BoundOutput {
            samples: 1,
            log_failure: None,
            method: "full_cover",
            p: 1.0,
            alpha,
        },
        BallMeasure::Partial(p) => {
            let q = BoundQuery::new(dim, p, a.gamma)?;
            let (r, method) = match a.method {
                Method::Numerical => (numerical_sample_bound(&q)?, "numerical"),
                Method::ClosedForm => (closed_form_bound(&q)?, "closed_form"),
            };
            BoundOutput {
                samples: r.samples,
                log_failure: Some(r.log_failure_at_n),
                method,
                p,
                alpha,
            }
        }
    };
    match ctx.format_or(Format::Json) {
        Format::Json => to_json(&out),
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(harness::fmt_sig).unwrap_or_default();
            Ok(format!(
                "samples,log_failure,method,p,alpha\n{},{},{},{},{}\n",
                out.samples,
                opt(out.log_failure),
                out.method,
                harness::fmt_sig(out.p),
                opt(out.alpha)
            ))
        }
    }
}

/// Space in which neighbor radii are measured.
#[derive(Debug, Args)]
pub struct RadiusSpace {
    #[arg(long, default_value_t = 2)]
    dim: usize,

    /// Free-space volume.
    #[arg(long, default_value_t = 1.0)]
    volume: f64,

    /// Upper end of the radius search; defaults to half the side of a cube of
    /// the given volume.
    #[arg(long)]
    r_max: Option<f64>,
}

impl RadiusSpace {
    fn r_max(&self) -> f64 {
        self.r_max
            .unwrap_or_else(|| 0.5 * self.volume.powf(1.0 / self.dim.max(1) as f64))
    }
}

#[derive(Debug, Args)]
pub struct KnnRadiusArgs {
    #[arg(long)]
    k: u64,

    #[arg(long)]
    n: u64,

    #[arg(long, default_value_t = 0.01)]
    gamma: f64,

    #[command(flatten)]
    space: RadiusSpace,

    /// Bisection tolerance; defaults to `r_max · 1e-9`.
    #[arg(long)]
    eps: Option<f64>,

    #[arg(long, value_enum, default_value_t = Method::Numerical)]
    method: Method,

    /// Also sample this many unit-cube point sets and report the empirical
    /// minimum (K+1)-th neighbor distances.
    #[arg(long)]
    trials: Option<u32>,
}

pub fn knn_radius(ctx: &Context, a: KnnRadiusArgs) -> anyhow::Result<String> {
    if ctx.format_or(Format::Json) != Format::Json {
        return usage("knn-radius only writes JSON");
    }
    if let Some(trials) = a.trials {
        if a.space.volume != 1.0 || a.space.r_max.is_some() {
            return usage("--trials samples the unit cube; drop --volume and --r-max");
        }
        let summary = knn_radius_empirical(a.space.dim, a.k, a.n, trials, ctx.seed.unwrap_or(0), a.gamma)?;
        return to_json(&summary);
    }
    let r_max = a.space.r_max();
    let q = RadiusQuery {
        k: a.k,
        n: a.n,
        gamma: a.gamma,
        dim: a.space.dim,
        free_volume: a.space.volume,
        r_max,
        eps: a.eps.unwrap_or(r_max * 1e-9),
    };
    let (result, method) = match a.method {
        Method::Numerical => (numerical_radius_bound(&q)?, "numerical"),
        Method::ClosedForm => (closed_form_radius(&q)?, "closed_form"),
    };
    to_json(&json!({
        "query": q,
        "method": method,
        "radius": result.radius,
        "certificate": result.certificate,
    }))
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    #[arg(long)]
    k: u64,

    #[arg(long, default_value_t = 0.01)]
    gamma: f64,

    #[command(flatten)]
    space: RadiusSpace,

    /// Sample counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
}

pub fn ratio(ctx: &Context, a: RatioArgs) -> anyhow::Result<String> {
    let rows = ratio_diagnostic(a.k, a.gamma, a.space.dim, a.space.volume, a.space.r_max(), &a.n)?;
    match ctx.format_or(Format::Csv) {
        Format::Csv => Ok(ratio_csv(&rows)?),
        Format::Json => to_json(&rows),
    }
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Full configuration as JSON; other flags are then ignored.
    #[arg(long)]
    spec: Option<PathBuf>,

    #[command(flatten)]
    env: EnvArgs,

    #[arg(long)]
    delta: Option<f64>,

    /// Samples per roadmap.
    #[arg(long, default_value_t = 100)]
    n: usize,

    /// Connect each vertex to its K nearest neighbors.
    #[arg(long, conflicts_with = "radius")]
    knn: Option<usize>,

    /// Connect vertices closer than this radius.
    #[arg(long)]
    radius: Option<f64>,

    #[arg(long, default_value_t = 100)]
    trials: u32,
}

pub fn mc(ctx: &Context, a: McArgs) -> anyhow::Result<String> {
    let mut cfg = match &a.spec {
        Some(path) => {
            let text = read(path)?;
            serde_json::from_str::<McConfig>(&text)
                .map_err(prmbound::Error::from)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let env = match (&a.env.env, a.env.hallway, a.delta) {
                (Some(path), _, _) => EnvSpec::File { path: path.clone() },
                (None, Some(d), Some(delta)) => EnvSpec::Hallway { d, delta },
                _ => return usage("give --spec, --env, or --hallway with --delta"),
            };
            let strategy = match (a.knn, a.radius) {
                (Some(k), None) => ConnectionStrategy::Knn(k),
                (None, Some(r)) => ConnectionStrategy::Radius(r),
                _ => return usage("give exactly one of --knn and --radius"),
            };
            McConfig {
                env,
                n_samples: a.n,
                strategy,
                trials: a.trials,
                master_seed: 0,
                query: None,
            }
        }
    };
    if let Some(seed) = ctx.seed {
        cfg.master_seed = seed;
    }
    let report = mc_success_estimate(&cfg)?;
    match ctx.format_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => Ok(trials_csv(&report)?),
    }
}

#[derive(Debug, Args)]
pub struct NetCheckArgs {
    /// JSON array of sample coordinates.
    #[arg(long, conflicts_with = "uniform")]
    samples: Option<PathBuf>,

    /// Draw this many uniform samples instead (seeded by `--seed`).
    #[arg(long)]
    uniform: Option<u64>,

    #[command(flatten)]
    env: EnvArgs,

    #[arg(long)]
    delta: Option<f64>,

    /// Net radius α.
    #[arg(long)]
    alpha: f64,

    /// Verification grid pitch; defaults to α/8.
    #[arg(long)]
    pitch: Option<f64>,
}

pub fn net_check(ctx: &Context, a: NetCheckArgs) -> anyhow::Result<String> {
    let Some(env) = a.env.build(a.delta)? else {
        return usage("give --env, or --hallway with --delta");
    };
    let samples: Vec<Point> = match (&a.samples, a.uniform) {
        (Some(path), None) => serde_json::from_str(&read(path)?)
            .map_err(prmbound::Error::from)
            .with_context(|| format!("parsing {}", path.display()))?,
        (None, Some(n)) => uniform_samples(&env, n, ctx.seed.unwrap_or(0)),
        _ => return usage("give exactly one of --samples and --uniform"),
    };
    let pitch = a.pitch.unwrap_or_else(|| default_net_pitch(a.alpha));
    let certified = prmbound::net_check(&samples, &env, a.alpha, pitch)?;
    match ctx.format_or(Format::Json) {
        Format::Json => to_json(&json!({
            "certified": certified,
            "alpha": a.alpha,
            "pitch": pitch,
            "samples": samples.len(),
        })),
        Format::Csv => Ok(format!(
            "certified,alpha,pitch,samples\n{certified},{},{},{}\n",
            harness::fmt_sig(a.alpha),
            harness::fmt_sig(pitch),
            samples.len()
        )),
    }
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// JSON spec file.
    spec: PathBuf,
}

pub fn table(ctx: &Context, a: SpecArgs) -> anyhow::Result<String> {
    let mut spec = TableSpec::from_json(&read(&a.spec)?).with_context(|| format!("parsing {}", a.spec.display()))?;
    if let Some(seed) = ctx.seed {
        spec.master_seed = seed;
    }
    let rows = run_table_rows(&spec)?;
    match ctx.format_or(Format::Csv) {
        Format::Csv => Ok(table_csv(&rows)?),
        Format::Json => to_json(&rows),
    }
}

/// `--seed` narrows the family to that single task instance.
pub fn schedule(ctx: &Context, a: SpecArgs) -> anyhow::Result<String> {
    let mut spec = TaskSpec::from_json(&read(&a.spec)?).with_context(|| format!("parsing {}", a.spec.display()))?;
    if let Some(seed) = ctx.seed {
        spec.seeds = SeedSpec::List(vec![seed]);
    }
    let rows = compare_strategies(&spec)?;
    match ctx.format_or(Format::Csv) {
        Format::Csv => Ok(comparison_csv(&rows)?),
        Format::Json => to_json(&rows),
    }
}

#[derive(Debug, Args)]
pub struct HallwayArgs {
    #[arg(long)]
    dim: usize,

    /// Hallway half-width, in (0, 0.5).
    #[arg(long)]
    delta: f64,
}

pub fn hallway(ctx: &Context, a: HallwayArgs) -> anyhow::Result<String> {
    if ctx.format_or(Format::Json) != Format::Json {
        return usage("hallway only writes JSON");
    }
    Ok(make_hallway(a.dim, a.delta)?.to_json() + "\n")
}
