//! Adaptive allocation of a sampling budget across parallel MCMC chains.
//!
//! Chains are scored on short blocks of their output by the kernel Stein
//! discrepancy (KSD), a bandit decides which chain runs next, and the pooled
//! output is reweighted region by region using log-mass estimates built from
//! a nearest-neighbour Rényi entropy estimator. The weighted sample stays
//! consistent even when every individual chain only explores part of the
//! target.
//!
//! Modules, bottom up:
//!
//! - [`targets`]: unnormalized densities with analytic scores and budget counters.
//! - [`stein`]: the IMQ kernel, the Stein kernel and (block) KSD.
//! - [`samplers`]: MH, MALA and NUTS chains that emit fixed-size batches.
//! - [`baselines`]: annealed SMC and parallel tempering.
//! - [`bandit`]: UCB1 and ε-greedy over block-KSD losses.
//! - [`knn`], [`weighting`]: kNN graphs, Rényi entropy, region weights.
//! - [`clustering`]: chain grouping, k-means, final reweighting.
//! - [`orchestrator`]: the three top-level procedures.
//!
//! ```
//! use ksd_mcmc::targets::standard_normal;
//! use ksd_mcmc::stein::{ksd, KernelConfig};
//! use ksd_mcmc::WeightedSample;
//!
//! let target = standard_normal(1);
//! let at_mode = WeightedSample::uniform(vec![vec![0.0]]).unwrap();
//! let s = ksd(&at_mode, target.model().as_ref(), &KernelConfig::default()).unwrap();
//! assert!((s - 1.0).abs() < 1e-12);
//! ```

pub mod bandit;
pub mod baselines;
pub mod clustering;
pub mod error;
pub mod knn;
pub mod orchestrator;
pub mod rng;
pub mod sample;
pub mod samplers;
pub mod stein;
pub mod targets;
pub mod weighting;

pub use error::{Error, Result};
pub use sample::WeightedSample;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/stein.md")]
    mod stein {}
    #[doc = include_str!("../../../book/src/samplers.md")]
    mod samplers {}
    #[doc = include_str!("../../../book/src/bandit.md")]
    mod bandit {}
    #[doc = include_str!("../../../book/src/weighting.md")]
    mod weighting {}
    #[doc = include_str!("../../../book/src/combining.md")]
    mod combining {}
}
