//! Unnormalized target densities with hand-derived gradients.
//!
//! A [`LogDensity`] is the pure model. [`Target`] wraps one with shared
//! evaluation counters, which is how sampling budgets are metered: every
//! call made through a `Target` is counted, calls made on the bare model
//! (as the Stein discrepancy meter does) are not.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

mod mixture;
mod sensor;

pub use mixture::{GaussianMixture, GaussianMixtureSpec, MixtureComponent};
pub use sensor::{
    make_sensor_posterior, simulate_sensor_world, Observation, SensorFile, SensorModel,
    SensorParams, SensorPosterior,
};

/// An unnormalized log-density `log p̂` and its score `∇ log p̂`.
///
/// Implementations return `-inf` outside the support; the gradient written
/// there is the zero vector.
pub trait LogDensity: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    /// Writes `∇ log p̂(x)` into `grad` and returns `log p̂(x)`.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Counts of model evaluations made through a [`Target`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct EvalCounts {
    pub density: u64,
    pub gradient: u64,
}

impl EvalCounts {
    pub fn total(&self) -> u64 {
        self.density + self.gradient
    }
}

impl std::ops::Add for EvalCounts {
    type Output = EvalCounts;
    fn add(self, rhs: Self) -> Self {
        EvalCounts {
            density: self.density + rhs.density,
            gradient: self.gradient + rhs.gradient,
        }
    }
}

impl std::ops::Sub for EvalCounts {
    type Output = EvalCounts;
    fn sub(self, rhs: Self) -> Self {
        EvalCounts {
            density: self.density - rhs.density,
            gradient: self.gradient - rhs.gradient,
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    density: AtomicU64,
    gradient: AtomicU64,
}

/// A model plus shared evaluation counters and optional ground truth.
///
/// Clones share the counters.
#[derive(Clone)]
pub struct Target {
    model: Arc<dyn LogDensity>,
    counters: Arc<Counters>,
    mean_truth: Option<Vec<f64>>,
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Target")
            .field("dim", &self.dim())
            .field("evals", &self.evals())
            .field("mean_truth", &self.mean_truth)
            .finish()
    }
}

impl Target {
    pub fn new(model: Arc<dyn LogDensity>, mean_truth: Option<Vec<f64>>) -> Self {
        Self {
            model,
            counters: Arc::default(),
            mean_truth,
        }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn mean_truth(&self) -> Option<&[f64]> {
        self.mean_truth.as_deref()
    }

    /// The uncounted model.
    pub fn model(&self) -> &Arc<dyn LogDensity> {
        &self.model
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.counters.density.fetch_add(1, Ordering::Relaxed);
        self.model.log_density(x)
    }

    pub fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        self.counters.gradient.fetch_add(1, Ordering::Relaxed);
        let mut g = vec![0.0; self.dim()];
        self.model.log_density_and_grad(x, &mut g);
        g
    }

    /// Counts as one density and one gradient evaluation.
    pub fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.counters.density.fetch_add(1, Ordering::Relaxed);
        self.counters.gradient.fetch_add(1, Ordering::Relaxed);
        self.model.log_density_and_grad(x, grad)
    }

    pub fn evals(&self) -> EvalCounts {
        EvalCounts {
            density: self.counters.density.load(Ordering::Relaxed),
            gradient: self.counters.gradient.load(Ordering::Relaxed),
        }
    }

    /// Same model and truth, fresh counters.
    pub fn fresh(&self) -> Target {
        Target {
            model: Arc::clone(&self.model),
            counters: Arc::default(),
            mean_truth: self.mean_truth.clone(),
        }
    }
}

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn cube(d: usize, lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo; d],
            hi: vec![hi; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect()
    }
}

/// Flat density on a box: `log p̂ = 0` inside, `-inf` outside.
#[derive(Debug, Clone)]
pub struct UniformBox {
    pub region: BoxRegion,
}

impl LogDensity for UniformBox {
    fn dim(&self) -> usize {
        self.region.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if self.region.contains(x) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.log_density(x)
    }
}

/// `p̂^β`, with `β = 0` meaning flat on the base support (or on `reference` if given).
pub struct Tempered {
    base: Arc<dyn LogDensity>,
    beta: f64,
    reference: Option<BoxRegion>,
}

impl LogDensity for Tempered {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if self.beta == 1.0 {
            return self.base.log_density(x);
        }
        if self.beta == 0.0 {
            if let Some(r) = &self.reference {
                return if r.contains(x) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
        let lp = self.base.log_density(x);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            self.beta * lp
        }
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        if self.beta == 1.0 {
            return self.base.log_density_and_grad(x, grad);
        }
        if self.beta == 0.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return self.log_density(x);
        }
        let lp = self.base.log_density_and_grad(x, grad);
        grad.iter_mut().for_each(|g| *g *= self.beta);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            self.beta * lp
        }
    }
}

/// The tempered target `p̂^β` for `β ∈ [0, 1]`.
///
/// The result has fresh counters; evaluations through it are not charged to
/// `target`. Samplers that need joint accounting evaluate the base target and
/// scale instead (see the baselines module).
pub fn temper(target: &Target, beta: f64, reference: Option<BoxRegion>) -> crate::Result<Target> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(crate::error::invalid(format!(
            "inverse temperature {beta} outside [0, 1]"
        )));
    }
    let model = Tempered {
        base: Arc::clone(target.model()),
        beta,
        reference,
    };
    Ok(Target::new(
        Arc::new(model),
        if beta == 1.0 {
            target.mean_truth.clone()
        } else {
            None
        },
    ))
}

/// Adds a constant to `log p̂`; the score is untouched.
pub struct Shifted {
    pub base: Arc<dyn LogDensity>,
    pub shift: f64,
}

impl LogDensity for Shifted {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.base.log_density(x) + self.shift
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.base.log_density_and_grad(x, grad) + self.shift
    }
}

/// Standard normal `exp(-xᵀx/2)` in `d` dimensions.
pub fn standard_normal(d: usize) -> Target {
    let spec = GaussianMixtureSpec {
        components: vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0; d],
            variance: 1.0,
        }],
    };
    GaussianMixture::new(spec)
        .expect("valid spec")
        .into_target()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_are_shared_by_clones_and_reset_by_fresh() {
        let t = standard_normal(2);
        let c = t.clone();
        t.log_density(&[0.0, 0.0]);
        c.grad_log_density(&[1.0, 0.0]);
        let mut g = [0.0; 2];
        c.log_density_and_grad(&[1.0, 0.0], &mut g);
        assert_eq!(
            t.evals(),
            EvalCounts {
                density: 2,
                gradient: 2
            }
        );
        assert_eq!(t.fresh().evals().total(), 0);
    }

    #[test]
    fn eval_counter_strictly_increases() {
        let t = standard_normal(1);
        let mut last = t.evals().total();
        for i in 0..10 {
            if i % 2 == 0 {
                t.log_density(&[0.3]);
            } else {
                t.grad_log_density(&[0.3]);
            }
            let now = t.evals().total();
            assert!(now > last);
            last = now;
        }
    }

    #[test]
    fn tempering_identity_and_flat() {
        let t = standard_normal(1);
        let one = temper(&t, 1.0, None).unwrap();
        let zero = temper(&t, 0.0, None).unwrap();
        for x in [-2.0, 0.0, 0.7] {
            assert_eq!(one.log_density(&[x]), t.model().log_density(&[x]));
            assert_eq!(one.grad_log_density(&[x]), t.grad_log_density(&[x]));
            assert_eq!(zero.grad_log_density(&[x]), vec![0.0]);
        }
        let half = temper(&t, 0.5, None).unwrap();
        assert!((half.log_density(&[2.0]) - (-1.0)).abs() < 1e-15);
        assert!(temper(&t, 1.5, None).is_err());
    }

    #[test]
    fn flat_reference_box() {
        let t = standard_normal(1);
        let zero = temper(&t, 0.0, Some(BoxRegion::cube(1, -1.0, 1.0))).unwrap();
        assert_eq!(zero.log_density(&[0.5]), 0.0);
        assert_eq!(zero.log_density(&[1.5]), f64::NEG_INFINITY);
    }
}
