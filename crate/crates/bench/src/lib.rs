//! Shared fixtures for the benchmarks.

use prmbound::geometry::{make_hallway, Environment, Point};
use prmbound::harness::uniform_samples;

/// Planar hallway of half-width 0.125, the mid-difficulty benchmark case.
pub fn bench_hallway(d: usize) -> Environment {
    make_hallway(d, 0.125).expect("valid hallway")
}

/// `n` seeded uniform samples of `env`.
pub fn bench_points(env: &Environment, n: u64) -> Vec<Point> {
    uniform_samples(env, n, 0x5eed)
}
