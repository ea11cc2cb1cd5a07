#![allow(dead_code)]

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use prmbound::knnradius::RadiusQuery;

/// `ln x` for an arbitrarily large integer, from its top 64 bits.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_u64().expect("fits").to_f64().expect("finite").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("64 bits");
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Exact `Σ_{i=1}^{d+1} C(2n, i)` in big integers.
pub fn binomial_sum(n: u64, d: usize) -> BigUint {
    let m = BigUint::from(2 * n);
    let mut term = BigUint::from(1u32);
    let mut sum = BigUint::zero();
    for i in 1..=(d as u64 + 1) {
        if i > 2 * n {
            break;
        }
        term = term * (&m - BigUint::from(i - 1)) / BigUint::from(i);
        sum += &term;
    }
    sum
}

/// Failure bound `ln(2 · Σ C(2n, i) · 2^(−p n / 2))` with the binomial sum
/// carried exactly.
pub fn exact_log_failure(n: u64, d: usize, p: f64) -> f64 {
    std::f64::consts::LN_2 + ln_big(&binomial_sum(n, d)) - p * n as f64 / 2.0 * std::f64::consts::LN_2
}

/// Smallest `n` with `f(n) < ln γ` and `f(n+1) < f(n)`, by scanning upward.
pub fn linear_scan_bound(d: usize, p: f64, gamma: f64, limit: u64) -> Option<u64> {
    let ln_gamma = gamma.ln();
    let mut here = prmbound::bounds::log_failure_prob(1, d, p);
    for n in 1..=limit {
        let next = prmbound::bounds::log_failure_prob(n + 1, d, p);
        if here < ln_gamma && next < here {
            return Some(n);
        }
        here = next;
    }
    None
}

/// Largest grid radius `j · eps <= r_max` accepted by the query predicate.
pub fn grid_scan_radius(q: &RadiusQuery) -> Option<f64> {
    let steps = (q.r_max / q.eps).floor() as u64;
    (1..=steps).rev().map(|j| j as f64 * q.eps).find(|&r| q.accepts(r))
}

/// Dense membership check along a segment at the given arc spacing.
pub fn dense_segment_free(env: &prmbound::Environment, a: &[f64], b: &[f64], spacing: f64) -> bool {
    let len = prmbound::geometry::dist_sq(a, b).sqrt();
    let steps = (len / spacing).ceil().max(1.0) as usize;
    (0..=steps).all(|i| {
        let t = i as f64 / steps as f64;
        let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
        env.contains(&p).unwrap()
    })
}
