//! Effective connection radius of K-nearest-neighbor roadmaps.
//!
//! Any `r` strictly below `min_v ‖v − nn_{K+1}(v)‖` is a connection radius
//! of the KNN graph. For `n` uniform samples the count of other samples inside
//! an `r`-ball is Binomial(n−1, q_r), so the Chernoff bound
//! `(n−1) · exp(−(n−1) · KL(p ‖ q_r))` with `p = K/(n−1)` bounds the chance that
//! some vertex has more than `K` neighbors within `r`. The closed form relaxes
//! `KL(p ‖ q) ≥ (p − q)² / 2p`.

use serde::{Deserialize, Serialize};

use crate::bounds::{ball_measure, numerical_sample_bound, unit_ball_volume, BallMeasure, BoundQuery};
use crate::error::{Error, Result};

/// Bernoulli Kullback–Leibler divergence `KL(p ‖ q)`.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return Err(Error::validation(format!(
            "kl_bernoulli needs p, q in (0, 1), got p={p}, q={q}"
        )));
    }
    Ok(kl_unchecked(p, q))
}

/// KL with `q = 0` mapped to `+∞`.
fn kl_unchecked(p: f64, q: f64) -> f64 {
    if q <= 0.0 {
        return f64::INFINITY;
    }
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusQuery {
    pub k: u64,
    pub n: u64,
    pub gamma: f64,
    pub dim: usize,
    pub free_volume: f64,
    pub r_max: f64,
    pub eps: f64,
}

impl RadiusQuery {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n <= self.k {
            return Err(Error::validation(format!(
                "need n > K >= 1, got n={}, K={}",
                self.n, self.k
            )));
        }
        if self.k >= self.n - 1 {
            return Err(Error::validation("K / (n - 1) must be below 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.dim == 0 {
            return Err(Error::validation("dimension must be >= 1"));
        }
        if !(self.free_volume > 0.0) {
            return Err(Error::validation("free volume must be positive"));
        }
        if !(self.eps > 0.0 && self.r_max > self.eps) {
            return Err(Error::validation(format!(
                "need r_max > eps > 0, got r_max={}, eps={}",
                self.r_max, self.eps
            )));
        }
        Ok(())
    }

    /// `P(B_1^d)` under the uniform measure.
    pub fn unit_ball_measure(&self) -> f64 {
        unit_ball_volume(self.dim) / self.free_volume
    }

    /// Neighbor fraction `p = K / (n − 1)`.
    pub fn neighbor_fraction(&self) -> f64 {
        self.k as f64 / (self.n - 1) as f64
    }

    /// Mass of an `r`-ball, `q_r = r^d · P(B_1^d)`.
    pub fn ball_mass(&self, r: f64) -> f64 {
        r.max(0.0).powi(self.dim as i32) * self.unit_ball_measure()
    }

    /// Natural log of `(n−1) · exp(−(n−1) · KL(p ‖ q_r))`.
    pub fn log_failure(&self, r: f64) -> f64 {
        let m = (self.n - 1) as f64;
        m.ln() - m * kl_unchecked(self.neighbor_fraction(), self.ball_mass(r))
    }

    /// Bisection predicate: the bound is at most γ at `r` and grows with `r`
    /// there (probed at `r − eps/2`).
    pub fn accepts(&self, r: f64) -> bool {
        let p = self.neighbor_fraction();
        let q = self.ball_mass(r);
        if q >= 1.0 {
            return false;
        }
        let q_below = self.ball_mass(r - self.eps / 2.0);
        let kl_here = kl_unchecked(p, q);
        let growing = kl_unchecked(p, q_below) > kl_here;
        growing && self.log_failure(r) <= self.gamma.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusCertificate {
    /// `K / (n − 1)`.
    pub p: f64,
    /// Ball mass at the returned radius.
    pub q: f64,
    /// Failure bound value (not its log) at the returned radius.
    pub failure_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusResult {
    /// `None` when the bound is vacuous for these parameters.
    pub radius: Option<f64>,
    pub certificate: Option<RadiusCertificate>,
}

impl RadiusResult {
    fn none() -> Self {
        RadiusResult {
            radius: None,
            certificate: None,
        }
    }

    fn at(q: &RadiusQuery, r: f64, failure_bound: f64) -> Self {
        RadiusResult {
            radius: Some(r),
            certificate: Some(RadiusCertificate {
                p: q.neighbor_fraction(),
                q: q.ball_mass(r),
                failure_bound,
            }),
        }
    }
}

/// Closed-form radius `[(K − sqrt(2K ln(n/γ))) / ((n−1) P(B_1^d))]^(1/d)`.
pub fn closed_form_radius(q: &RadiusQuery) -> Result<RadiusResult> {
    q.validate()?;
    let k = q.k as f64;
    let n = q.n as f64;
    let numerator = k - (2.0 * k * (n / q.gamma).ln()).sqrt();
    if numerator <= 0.0 {
        return Ok(RadiusResult::none());
    }
    let r = (numerator / ((n - 1.0) * q.unit_ball_measure())).powf(1.0 / q.dim as f64);
    Ok(RadiusResult::at(q, r, q.gamma))
}

/// Largest radius in `[eps, r_max]` (to within `eps`) accepted by
/// [`RadiusQuery::accepts`], found by bisection.
pub fn numerical_radius_bound(q: &RadiusQuery) -> Result<RadiusResult> {
    q.validate()?;
    if !q.accepts(q.eps) {
        return Ok(RadiusResult::none());
    }
    if q.accepts(q.r_max) {
        return Ok(RadiusResult::at(q, q.r_max, q.log_failure(q.r_max).exp()));
    }
    let mut lo = q.eps;
    let mut hi = q.r_max;
    while hi - lo > q.eps {
        let mid = 0.5 * (lo + hi);
        if q.accepts(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RadiusResult::at(q, lo, q.log_failure(lo).exp()))
}

/// One row of the connection-radius over net-radius sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: u64,
    pub net_radius: Option<f64>,
    pub conn_radius: Option<f64>,
    /// `conn_radius / (4 · net_radius)`; the radius-roadmap guarantee needs `>= 1`.
    pub ratio: Option<f64>,
}

impl RatioRow {
    /// `conn_radius / net_radius`, compared against 4.
    pub fn plain_ratio(&self) -> Option<f64> {
        self.ratio.map(|r| 4.0 * r)
    }
}

/// Largest net radius α whose numerical sample bound at `gamma` is at most `n`.
pub fn largest_net_radius(n: u64, d: usize, gamma: f64, free_volume: f64) -> Result<Option<f64>> {
    let fits = |alpha: f64| -> Result<bool> {
        match ball_measure(d, alpha, free_volume)? {
            BallMeasure::FullCover => Ok(true),
            BallMeasure::Partial(p) => match numerical_sample_bound(&BoundQuery::new(d, p, gamma)?) {
                Ok(b) => Ok(b.samples <= n),
                Err(Error::SampleOverflow(_)) => Ok(false),
                Err(e) => Err(e),
            },
        }
    };
    // radius at which the ball fills the space
    let full = (free_volume / unit_ball_volume(d)).powf(1.0 / d as f64);
    let mut hi = full * (1.0 - 1e-12);
    if !fits(hi)? {
        return Ok(None);
    }
    let mut lo = full * 1e-12;
    if fits(lo)? {
        return Ok(Some(lo));
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if fits(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Sweep of connection radius against net radius. γ is split evenly between
/// the net event and the connection-radius event.
pub fn ratio_diagnostic(
    k: u64,
    gamma: f64,
    d: usize,
    free_volume: f64,
    r_max: f64,
    n_values: &[u64],
) -> Result<Vec<RatioRow>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation("gamma must lie in (0, 1)"));
    }
    n_values
        .iter()
        .map(|&n| {
            if n <= k + 1 {
                return Err(Error::validation(format!("need n > K + 1, got n={n}, K={k}")));
            }
            let query = RadiusQuery {
                k,
                n,
                gamma: gamma / 2.0,
                dim: d,
                free_volume,
                r_max,
                eps: r_max * 1e-9,
            };
            let conn_radius = numerical_radius_bound(&query)?.radius;
            let net_radius = largest_net_radius(n, d, gamma / 2.0, free_volume)?;
            let ratio = match (conn_radius, net_radius) {
                (Some(c), Some(a)) => Some(c / (4.0 * a)),
                _ => None,
            };
            Ok(RatioRow {
                n,
                net_radius,
                conn_radius,
                ratio,
            })
        })
        .collect()
}
