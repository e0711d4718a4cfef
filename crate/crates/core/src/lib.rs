//! Locate p-means of probability measures on compact symmetric spaces.
//!
//! The p-mean of a measure `ν` is the minimizer of `H(y) = ∫ ρ^p(y, z) ν(dz)`
//! (`p = 2`: Fréchet mean, `p = 1`: geometric median). On a curved compact
//! space `H` generally has several local minima, so this crate searches for the
//! global one with a simulated-annealing diffusion whose drift is the gradient
//! of a *single* randomly refreshed sample of the cost, refreshed at the jump
//! times of a Poisson clock whose rate grows with time.
//!
//! Modules, bottom-up:
//!
//! * [`manifold`]: circle, flat tori and the round sphere (all of volume one),
//!   with exponential/logarithm maps and heat kernels;
//! * [`measure`]: discrete measures and their heat-smoothed versions;
//! * [`cost`]: power costs `ρ^p`, their heat smoothings and the objectives;
//! * [`landscape`]: grid fields, brute-force minimizers, the critical
//!   elevation `c(U)` and Gibbs masses;
//! * [`anneal`]: the annealing SDE, its homogenized reference, and ensembles;
//! * [`empirics`]: empirical p-mean processes and uniqueness probes;
//! * [`cli`]: configuration, commands and report files used by the binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod cli;
pub mod cost;
pub mod empirics;
pub mod error;
pub mod landscape;
pub mod manifold;
pub mod measure;
pub mod rng;

pub use error::{Error, Result};
pub use manifold::{Manifold, Point, TangentVector};
pub use measure::{DiscreteMeasure, SmoothedMeasure};
