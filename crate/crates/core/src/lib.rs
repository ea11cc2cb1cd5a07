//! Sample-count bounds for probabilistic roadmaps in narrow passages.
//!
//! Free space is a union of axis-aligned boxes ([`geometry`]). [`bounds`]
//! turns a passage clearance into a number of uniform samples that forms an
//! α-net with a chosen failure probability; [`knnradius`] gives the radius a
//! K-nearest-neighbor roadmap provably connects. [`prm`] builds and queries
//! the roadmaps, [`harness`] runs seeded Monte Carlo experiments, and
//! [`scheduler`] spends sample budgets across a queue of planning skeletons.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod knnradius;
pub mod prm;
pub mod scheduler;

pub use bounds::{
    ball_measure, closed_form_bound, numerical_sample_bound, BallMeasure, BoundMethod, BoundQuery, BoundResult,
};
pub use error::{Error, Result};
pub use geometry::{hallway_query, make_hallway, Aabb, Environment, Point};
pub use harness::{mc_success_estimate, net_check, McConfig, TrialReport};
pub use knnradius::{closed_form_radius, numerical_radius_bound, RadiusQuery, RadiusResult};
pub use prm::{construct, ConnectionStrategy, PrmGraph};
pub use scheduler::{compare_strategies, tamp_plan, StrategyConfig, TaskSpec};
