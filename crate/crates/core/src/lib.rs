//! Monte Carlo and discretization toolkit for products of i.i.d. random
//! invertible matrices: projective chain, norm cocycle, weighted Hölder
//! seminorms, reduced transfer operators and exit-time statistics.

pub mod error;
pub mod geometry;
pub mod banach;
pub mod chain;
pub mod conditioned;
pub mod ergodic;
pub mod law;
pub mod orchestrator;
pub mod parallel;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{act, angular_dist, cocycle_rho, n_of, GroupElement, ProjPoint};
pub use rng::SeedKey;
