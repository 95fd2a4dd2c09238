//! Resumable base chains.
//!
//! A [`ChainHandle`] owns one chain's position, adaptation state, random
//! stream and history, and emits fixed-size [`Batch`]es. Every density or
//! gradient evaluation goes through the shared [`Target`] counters and is
//! mirrored in the chain's own tally, so per-chain budgets always add up to
//! the target total.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, StreamRng};
use crate::targets::{BoxRegion, EvalCounts, Target};

mod mala;
mod mh;
mod nuts;

pub(crate) use mala::mala_step;
pub use mala::{mala_batch, mala_log_accept_ratio};
pub use mh::mh_batch;
pub use nuts::{leapfrog, nuts_batch, NutsSettings, NutsState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Mh,
    Mala,
    Nuts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SamplerParams {
    Mh { step: f64 },
    Mala { step: f64 },
    Nuts(NutsSettings),
}

impl SamplerParams {
    pub fn kind(&self) -> SamplerKind {
        match self {
            SamplerParams::Mh { .. } => SamplerKind::Mh,
            SamplerParams::Mala { .. } => SamplerKind::Mala,
            SamplerParams::Nuts(_) => SamplerKind::Nuts,
        }
    }

    fn needs_gradient(&self) -> bool {
        !matches!(self, SamplerParams::Mh { .. })
    }
}

/// A batch of consecutive chain states.
#[derive(Debug, Clone)]
pub struct Batch {
    pub sampler_id: usize,
    pub points: Vec<Vec<f64>>,
    /// `∇ log p̂` at each point when the sampler had it for free.
    pub scores: Option<Vec<Vec<f64>>>,
    /// Filled in by the orchestrator.
    pub block_ksd: Option<f64>,
    /// Evaluations spent producing this batch.
    pub evals: EvalCounts,
}

/// One chain.
#[derive(Debug, Clone)]
pub struct ChainHandle {
    pub id: usize,
    params: SamplerParams,
    pub(crate) position: Vec<f64>,
    pub(crate) log_density: f64,
    /// Score at `position`; kept for gradient-based kernels.
    pub(crate) grad: Vec<f64>,
    pub(crate) nuts: Option<NutsState>,
    pub(crate) rng: StreamRng,
    history: Vec<Vec<f64>>,
    pub accepted: u64,
    pub proposed: u64,
    /// MALA fallbacks to a plain MH move, or NUTS divergences.
    pub flagged: u64,
    evals: EvalCounts,
}

impl ChainHandle {
    /// Starts a chain at `init`; costs one evaluation (with gradient for MALA/NUTS).
    pub fn new(
        id: usize,
        params: SamplerParams,
        init: Vec<f64>,
        rng: StreamRng,
        target: &Target,
    ) -> Result<Self> {
        if init.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: init.len(),
            });
        }
        match params {
            SamplerParams::Mh { step } | SamplerParams::Mala { step }
                if !(step > 0.0 && step.is_finite()) =>
            {
                return Err(invalid(format!("step size must be positive, got {step}")));
            }
            _ => {}
        }
        let mut chain = ChainHandle {
            id,
            params,
            position: init,
            log_density: f64::NAN,
            grad: vec![],
            nuts: match params {
                SamplerParams::Nuts(s) => Some(NutsState::new(s)),
                _ => None,
            },
            rng,
            history: Vec::new(),
            accepted: 0,
            proposed: 0,
            flagged: 0,
            evals: EvalCounts::default(),
        };
        let x = chain.position.clone();
        if params.needs_gradient() {
            let (lp, g) = chain.eval_with_grad(target, &x);
            chain.log_density = lp;
            chain.grad = g;
        } else {
            chain.log_density = chain.eval(target, &x);
        }
        if !chain.log_density.is_finite() {
            return Err(Error::NonFinite {
                what: "initial log-density",
                point: x,
            });
        }
        Ok(chain)
    }

    pub fn params(&self) -> &SamplerParams {
        &self.params
    }

    pub fn kind(&self) -> SamplerKind {
        self.params.kind()
    }

    pub fn position(&self) -> &[f64] {
        &self.position
    }

    pub fn history(&self) -> &[Vec<f64>] {
        &self.history
    }

    /// Evaluations made by this chain, including initialization.
    pub fn evals(&self) -> EvalCounts {
        self.evals
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Draws the next batch with whichever kernel this chain runs.
    pub fn next_batch(&mut self, target: &Target, n_b: usize) -> Result<Batch> {
        match self.params {
            SamplerParams::Mh { .. } => mh_batch(self, target, n_b),
            SamplerParams::Mala { .. } => mala_batch(self, target, n_b),
            SamplerParams::Nuts(_) => nuts_batch(self, target, n_b),
        }
    }

    /// Moves the chain to `x` (used by tempering baselines after swaps and
    /// resampling), reusing known values.
    pub(crate) fn set_state(&mut self, x: Vec<f64>, log_density: f64, grad: Vec<f64>) {
        self.position = x;
        self.log_density = log_density;
        self.grad = grad;
    }

    pub(crate) fn eval(&mut self, target: &Target, x: &[f64]) -> f64 {
        self.evals.density += 1;
        target.log_density(x)
    }

    pub(crate) fn eval_with_grad(&mut self, target: &Target, x: &[f64]) -> (f64, Vec<f64>) {
        self.evals.density += 1;
        self.evals.gradient += 1;
        let mut g = vec![0.0; x.len()];
        let lp = target.log_density_and_grad(x, &mut g);
        (lp, g)
    }

    pub(crate) fn gaussian_vec(&mut self, d: usize) -> Vec<f64> {
        (0..d)
            .map(|_| StandardNormal.sample(&mut self.rng))
            .collect()
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub(crate) fn finish_batch(
        &mut self,
        points: Vec<Vec<f64>>,
        scores: Option<Vec<Vec<f64>>>,
        before: EvalCounts,
    ) -> Batch {
        self.history.extend(points.iter().cloned());
        Batch {
            sampler_id: self.id,
            points,
            scores,
            block_ksd: None,
            evals: self.evals - before,
        }
    }
}

/// How to build a pool of chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub kind: SamplerKind,
    pub count: usize,
    /// Explicit step sizes (MH/MALA); drawn uniformly from `[0.1, 5]` when absent.
    #[serde(default)]
    pub steps: Option<Vec<f64>>,
    /// Seed for the random step sizes; fixed across replicates.
    #[serde(default)]
    pub params_seed: u64,
    pub init_box: BoxRegion,
    /// Explicit start points, one per chain; overrides `init_box` draws.
    #[serde(default)]
    pub starts: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub nuts: Option<NutsSettings>,
}

pub const RANDOM_STEP_RANGE: (f64, f64) = (0.1, 5.0);

impl PoolSpec {
    /// Random step sizes (seed 0), starts drawn from `init_box`, default NUTS settings.
    pub fn new(kind: SamplerKind, count: usize, init_box: BoxRegion) -> Self {
        Self {
            kind,
            count,
            steps: None,
            params_seed: 0,
            init_box,
            starts: None,
            nuts: None,
        }
    }

    pub fn with_steps(mut self, steps: Vec<f64>) -> Self {
        self.count = steps.len();
        self.steps = Some(steps);
        self
    }

    /// Per-chain parameters, independent of the run seed.
    pub fn params(&self) -> Result<Vec<SamplerParams>> {
        if self.count == 0 {
            return Err(invalid("sampler pool must have at least one chain"));
        }
        let steps = match (&self.steps, self.kind) {
            (_, SamplerKind::Nuts) => None,
            (Some(s), _) => {
                if s.len() != self.count {
                    return Err(invalid(format!(
                        "{} step sizes for {} chains",
                        s.len(),
                        self.count
                    )));
                }
                Some(s.clone())
            }
            (None, _) => {
                let mut rng = stream(self.params_seed, "pool-params", 0);
                Some(
                    (0..self.count)
                        .map(|_| rng.random_range(RANDOM_STEP_RANGE.0..=RANDOM_STEP_RANGE.1))
                        .collect(),
                )
            }
        };
        Ok((0..self.count)
            .map(|i| match self.kind {
                SamplerKind::Mh => SamplerParams::Mh {
                    step: steps.as_ref().unwrap()[i],
                },
                SamplerKind::Mala => SamplerParams::Mala {
                    step: steps.as_ref().unwrap()[i],
                },
                SamplerKind::Nuts => SamplerParams::Nuts(self.nuts.unwrap_or_default()),
            })
            .collect())
    }
}

/// Initial point drawn from the box, retried until the target density is finite.
pub fn draw_init(init_box: &BoxRegion, target: &Target, rng: &mut StreamRng) -> Vec<f64> {
    for _ in 0..1000 {
        let x = init_box.sample(rng);
        if target.model().log_density(&x).is_finite() {
            return x;
        }
    }
    init_box.sample(rng)
}

/// Builds the chains of `spec` for one replicate: chain `i` gets stream `i`
/// of the run seed for both its start point and its transitions.
pub fn make_sampler_pool(
    spec: &PoolSpec,
    run_seed: u64,
    target: &Target,
) -> Result<Vec<ChainHandle>> {
    if let Some(starts) = &spec.starts {
        if starts.len() != spec.count {
            return Err(invalid(format!(
                "{} start points for {} chains",
                starts.len(),
                spec.count
            )));
        }
    }
    spec.params()?
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let init = match &spec.starts {
                Some(starts) => starts[i].clone(),
                None => draw_init(
                    &spec.init_box,
                    target,
                    &mut stream(run_seed, "init", i as u64),
                ),
            };
            ChainHandle::new(i, p, init, stream(run_seed, "chain", i as u64), target)
        })
        .collect()
}

/// Pool with step sizes uniform on `[0.1, 5]` (MH/MALA) or default NUTS settings.
pub fn make_random_sampler_pool(
    kind: SamplerKind,
    count: usize,
    seed: u64,
    init_box: BoxRegion,
    target: &Target,
) -> Result<Vec<ChainHandle>> {
    let spec = PoolSpec {
        params_seed: seed,
        ..PoolSpec::new(kind, count, init_box)
    };
    make_sampler_pool(&spec, seed, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::standard_normal;

    #[test]
    fn same_seed_same_pool() {
        let t = standard_normal(2);
        let bx = BoxRegion::cube(2, -3.0, 3.0);
        let a = make_random_sampler_pool(SamplerKind::Mala, 6, 9, bx.clone(), &t).unwrap();
        let b = make_random_sampler_pool(SamplerKind::Mala, 6, 9, bx, &t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.params(), y.params());
            assert_eq!(x.position(), y.position());
        }
        for c in &a {
            match c.params() {
                SamplerParams::Mala { step } => assert!((0.1..=5.0).contains(step)),
                _ => panic!(),
            }
        }
    }

    #[test]
    fn explicit_ladder_and_nuts_pool() {
        let t = standard_normal(2);
        let spec = PoolSpec::new(SamplerKind::Mh, 5, BoxRegion::cube(2, -1.0, 1.0))
            .with_steps(vec![0.1, 0.2, 0.5, 1.0, 2.0]);
        let pool = make_sampler_pool(&spec, 1, &t).unwrap();
        assert_eq!(pool[3].params(), &SamplerParams::Mh { step: 1.0 });
        let nuts =
            make_random_sampler_pool(SamplerKind::Nuts, 10, 1, BoxRegion::cube(2, -5.0, 5.0), &t)
                .unwrap();
        assert_eq!(nuts.len(), 10);
        assert!(nuts.iter().all(|c| c.kind() == SamplerKind::Nuts));
        let bad = PoolSpec {
            steps: Some(vec![1.0]),
            ..spec.clone()
        };
        assert!(make_sampler_pool(&bad, 1, &t).is_err());
        let starts = PoolSpec {
            starts: Some(vec![vec![0.5, 0.5]; 5]),
            ..spec.clone()
        };
        assert!(make_sampler_pool(&starts, 1, &t)
            .unwrap()
            .iter()
            .all(|c| c.position() == [0.5, 0.5]));
        let short = PoolSpec {
            starts: Some(vec![vec![0.5, 0.5]]),
            ..spec
        };
        assert!(make_sampler_pool(&short, 1, &t).is_err());
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let t = Target::new(
            std::sync::Arc::new(crate::targets::UniformBox {
                region: BoxRegion::cube(1, 0.0, 1.0),
            }),
            None,
        );
        let r = ChainHandle::new(
            0,
            SamplerParams::Mh { step: 1.0 },
            vec![2.0],
            stream(0, "c", 0),
            &t,
        );
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
