//! Isotropic Gaussian mixtures.
//!
//! The density is
//!
//! ```text
//! p̂(x) = Σ_i β_i σ_i^{-d/2} exp(-‖x - μ_i‖² / (2 σ_i))
//! ```
//!
//! where `σ_i` is the per-coordinate variance. The `σ_i^{-d/2}` factor makes
//! `β_i / Σ β` the probability mass of component `i`, so the coefficients
//! double as the true mode weights; `(2π)^{-d/2}` is dropped as a common
//! constant.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LogDensity, Target};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    /// Unnormalized mixture coefficient `β_i > 0`.
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Per-coordinate variance `σ_i > 0` (covariance `σ_i I`).
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub components: Vec<MixtureComponent>,
}

impl GaussianMixtureSpec {
    /// The three-mode mixture used in the known-region experiments.
    pub fn three_mode() -> Self {
        let c = |w: f64, m: [f64; 2], v: f64| MixtureComponent {
            weight: w,
            mean: m.to_vec(),
            variance: v,
        };
        Self {
            components: vec![
                c(0.5, [6.0, 6.0], 0.9),
                c(0.3, [-6.0, 6.0], 0.4),
                c(0.2, [0.0, -6.0], 0.5),
            ],
        }
    }

    /// Random mixture: means uniform on `[-half_width, half_width]^d`,
    /// variances uniform on `variance_range`, coefficients uniform on `[0.1, 1]`.
    pub fn random(
        n_modes: usize,
        d: usize,
        half_width: f64,
        variance_range: (f64, f64),
        rng: &mut impl Rng,
    ) -> Self {
        let components = (0..n_modes)
            .map(|_| MixtureComponent {
                mean: (0..d)
                    .map(|_| rng.random_range(-half_width..=half_width))
                    .collect(),
                variance: rng.random_range(variance_range.0..=variance_range.1),
                weight: rng.random_range(0.1..=1.0),
            })
            .collect();
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    /// Normalized mode masses `β_i / Σ β`.
    pub fn mode_weights(&self) -> Vec<f64> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        self.components.iter().map(|c| c.weight / total).collect()
    }

    /// `Σ β_i μ_i / Σ β_i`.
    pub fn mean(&self) -> Vec<f64> {
        let w = self.mode_weights();
        let mut m = vec![0.0; self.dim()];
        for (c, wi) in self.components.iter().zip(&w) {
            for (mj, cj) in m.iter_mut().zip(&c.mean) {
                *mj += wi * cj;
            }
        }
        m
    }

    fn validate(&self) -> Result<()> {
        let first = self
            .components
            .first()
            .ok_or_else(|| invalid("mixture needs at least one component"))?;
        let d = first.mean.len();
        if d == 0 {
            return Err(invalid("mixture dimension must be positive"));
        }
        for (i, c) in self.components.iter().enumerate() {
            if c.mean.len() != d {
                return Err(crate::Error::DimensionMismatch {
                    expected: d,
                    got: c.mean.len(),
                });
            }
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(invalid(format!(
                    "component {i}: variance must be positive, got {}",
                    c.variance
                )));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(invalid(format!(
                    "component {i}: weight must be positive, got {}",
                    c.weight
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaussianMixture {
    spec: GaussianMixtureSpec,
    /// `log β_i - (d/2) log σ_i`
    log_coef: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(spec: GaussianMixtureSpec) -> Result<Self> {
        spec.validate()?;
        let half_d = spec.dim() as f64 / 2.0;
        let log_coef = spec
            .components
            .iter()
            .map(|c| c.weight.ln() - half_d * c.variance.ln())
            .collect();
        Ok(Self { spec, log_coef })
    }

    pub fn spec(&self) -> &GaussianMixtureSpec {
        &self.spec
    }

    pub fn into_target(self) -> Target {
        let truth = self.spec.mean();
        Target::new(Arc::new(self), Some(truth))
    }

    /// Index of the component with the largest responsibility at `x`.
    pub fn nearest_mode(&self, x: &[f64]) -> usize {
        let logs = self.component_logs(x);
        let mut best = 0;
        for (i, l) in logs.iter().enumerate() {
            if *l > logs[best] {
                best = i;
            }
        }
        best
    }

    fn component_logs(&self, x: &[f64]) -> Vec<f64> {
        self.spec
            .components
            .iter()
            .zip(&self.log_coef)
            .map(|(c, lc)| lc - crate::sample::sq_dist(x, &c.mean) / (2.0 * c.variance))
            .collect()
    }

    /// Draws exact i.i.d. samples.
    pub fn sample_iid(&self, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        use rand_distr::{weighted::WeightedIndex, Distribution, StandardNormal};
        let pick = WeightedIndex::new(self.spec.components.iter().map(|c| c.weight))
            .expect("positive weights");
        (0..n)
            .map(|_| {
                let c = &self.spec.components[pick.sample(rng)];
                let s = c.variance.sqrt();
                c.mean
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + s * z
                    })
                    .collect()
            })
            .collect()
    }
}

impl LogDensity for GaussianMixture {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        crate::sample::log_sum_exp(&self.component_logs(x))
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let logs = self.component_logs(x);
        let lse = crate::sample::log_sum_exp(&logs);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for ((c, l), _) in self.spec.components.iter().zip(&logs).zip(0..) {
            let r = (l - lse).exp();
            if r == 0.0 {
                continue;
            }
            for ((g, m), xi) in grad.iter_mut().zip(&c.mean).zip(x) {
                *g += r * (m - xi) / c.variance;
            }
        }
        lse
    }
}
