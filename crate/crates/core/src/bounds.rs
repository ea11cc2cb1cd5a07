//! Sample counts sufficient for uniform random samples to form an α-net.
//!
//! Two routes are provided: the closed-form VC bound
//! `max{(4/p) log2(2/γ), (8d/p) log2(13/p)}` and a numerical search over the
//! tighter intermediate expression
//!
//! ```text
//! f(n) = 2 · (Σ_{i=1}^{d+1} C(2n, i)) · 2^(-p n / 2)
//! ```
//!
//! where `p` is the uniform-measure mass of an α-ball. `f` rises to a single
//! maximum and then decays, so the search doubles an upper bracket until it
//! lands on the decreasing side below `γ`, then bisects.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplier carried by the VC-dimension failure bound.
pub const LEADING_FACTOR: f64 = 2.0;

/// Smallest failure probability accepted before taking logs.
pub const GAMMA_FLOOR: f64 = 1e-300;

/// Largest sample count the numerical search will consider.
pub const MAX_SAMPLES: u64 = 1 << 60;

/// Volume of the `d`-dimensional unit Euclidean ball, `π^(d/2) / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} · 2π / d
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Uniform-measure mass of an α-ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallMeasure {
    /// `0 < p < 1`.
    Partial(f64),
    /// The ball is at least as large as the free space; any single sample suffices.
    FullCover,
}

impl BallMeasure {
    pub fn value(self) -> Option<f64> {
        match self {
            BallMeasure::Partial(p) => Some(p),
            BallMeasure::FullCover => None,
        }
    }
}

/// `p = V_d · α^d / vol(X_free)`.
pub fn ball_measure(d: usize, alpha: f64, free_volume: f64) -> Result<BallMeasure> {
    if d == 0 {
        return Err(Error::validation("dimension must be >= 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::validation(format!("alpha must be positive, got {alpha}")));
    }
    if !(free_volume > 0.0 && free_volume.is_finite()) {
        return Err(Error::validation(format!(
            "free volume must be positive, got {free_volume}"
        )));
    }
    let p = unit_ball_volume(d) * alpha.powi(d as i32) / free_volume;
    Ok(if p >= 1.0 {
        BallMeasure::FullCover
    } else {
        BallMeasure::Partial(p)
    })
}

/// Net radius whose 4α-radius roadmap finds paths of clearance `delta`.
pub fn clearance_to_net_radius(delta: f64) -> f64 {
    delta / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub dim: usize,
    pub ball_measure: f64,
    pub gamma: f64,
}

impl BoundQuery {
    pub fn new(dim: usize, ball_measure: f64, gamma: f64) -> Result<Self> {
        let q = BoundQuery {
            dim,
            ball_measure,
            gamma,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::validation("dimension must be >= 1"));
        }
        if !(self.ball_measure > 0.0 && self.ball_measure < 1.0) {
            return Err(Error::validation(format!(
                "ball measure must lie in (0, 1), got {}",
                self.ball_measure
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    ClosedForm,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub samples: u64,
    /// Natural log of the failure bound at `samples`.
    pub log_failure_at_n: f64,
    pub method: BoundMethod,
    /// Multiplier applied to the binomial sum (see [`LEADING_FACTOR`]).
    pub leading_factor: f64,
    /// Every `(n, ln f(n))` evaluated by the numerical search, in order.
    pub search_trace: Option<Vec<(u64, f64)>>,
}

/// `ln C(m, k)` as a falling-factorial sum. Every factor is an exact integer
/// in f64 for `m < 2^53`, so there is no cancellation at large `m`.
pub fn ln_binomial(m: u64, k: u64) -> f64 {
    if k > m {
        return f64::NEG_INFINITY;
    }
    let k = k.min(m - k);
    (0..k).map(|j| ((m - j) as f64).ln() - ((j + 1) as f64).ln()).sum()
}

/// `ln Σ exp(x_i)` with the max shifted out.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Natural log of `2 · (Σ_{i=1}^{d+1} C(2n, i)) · 2^(-p n / 2)`.
pub fn log_failure_prob(n: u64, dim: usize, ball_measure: f64) -> f64 {
    let terms: Vec<f64> = (1..=dim as u64 + 1).map(|i| ln_binomial(2 * n, i)).collect();
    LEADING_FACTOR.ln() + log_sum_exp(&terms) - ball_measure * n as f64 / 2.0 * std::f64::consts::LN_2
}

/// Closed-form VC sample bound with base-2 logarithms.
pub fn closed_form_bound(q: &BoundQuery) -> Result<BoundResult> {
    q.validate()?;
    let p = q.ball_measure;
    let confidence_arm = 4.0 / p * (2.0 / q.gamma).log2();
    let existence_arm = 8.0 * q.dim as f64 / p * (13.0 / p).log2();
    let samples = confidence_arm.max(existence_arm).ceil() as u64;
    Ok(BoundResult {
        samples,
        log_failure_at_n: log_failure_prob(samples, q.dim, p),
        method: BoundMethod::ClosedForm,
        leading_factor: LEADING_FACTOR,
        search_trace: None,
    })
}

/// Smallest `n` with `f(n+1) < f(n) < γ`, via doubling then bisection.
pub fn numerical_sample_bound(q: &BoundQuery) -> Result<BoundResult> {
    q.validate()?;
    let ln_gamma = q.gamma.max(GAMMA_FLOOR).ln();
    let mut trace = Vec::new();
    let mut f = |n: u64| {
        let v = log_failure_prob(n, q.dim, q.ball_measure);
        trace.push((n, v));
        v
    };
    let mut accept = |n: u64| {
        let here = f(n);
        here < ln_gamma && f(n + 1) < here
    };

    let mut lower = 1_u64;
    let mut upper = 1_u64;
    while !accept(upper) {
        if upper >= MAX_SAMPLES {
            return Err(Error::SampleOverflow(MAX_SAMPLES));
        }
        upper *= 2;
    }
    while lower + 1 < upper {
        let mid = lower + (upper - lower) / 2;
        if accept(mid) {
            upper = mid;
        } else {
            lower = mid;
        }
    }
    let log_failure_at_n = log_failure_prob(upper, q.dim, q.ball_measure);
    Ok(BoundResult {
        samples: upper,
        log_failure_at_n,
        method: BoundMethod::Numerical,
        leading_factor: LEADING_FACTOR,
        search_trace: Some(trace),
    })
}

/// `C_d = 2^d · d^((d+1)/2) / (2πe)^(d/2)`.
pub fn asymptotic_constant(d: usize) -> f64 {
    let d = d as f64;
    2f64.powf(d) * d.powf((d + 1.0) / 2.0) / (2.0 * std::f64::consts::PI * std::f64::consts::E).powf(d / 2.0)
}

/// Scaling estimate `(C_d/δ^d) · (log2(1/γ) + d · log2(C_d/δ^d))`. Diagnostic only.
pub fn asymptotic_samples(d: usize, delta: f64, gamma: f64) -> Result<f64> {
    if d == 0 || !(delta > 0.0) || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation(
            "asymptotic_samples needs d >= 1, delta > 0, gamma in (0, 1)",
        ));
    }
    let lead = asymptotic_constant(d) / delta.powi(d as i32);
    Ok(lead * ((1.0 / gamma).log2() + d as f64 * lead.log2()))
}

/// Sample bound for finding paths of clearance `delta` in a space of volume
/// `free_volume`: numerical bound at net radius `delta / 2`. A full-cover
/// ball measure yields one sample.
pub fn samples_for_clearance(d: usize, delta: f64, gamma: f64, free_volume: f64) -> Result<u64> {
    match ball_measure(d, clearance_to_net_radius(delta), free_volume)? {
        BallMeasure::FullCover => Ok(1),
        BallMeasure::Partial(p) => Ok(numerical_sample_bound(&BoundQuery::new(d, p, gamma)?)?.samples),
    }
}
