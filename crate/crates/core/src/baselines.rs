//! Tempering baselines: annealed SMC and parallel tempering, both moving
//! with MALA.
//!
//! Both evaluate the base target through its counters and scale by the
//! inverse temperature themselves, so their budgets are comparable with
//! the adaptive procedures.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng::stream;
use crate::sample::log_sum_exp;
use crate::samplers::{draw_init, mala_step, ChainHandle, SamplerParams};
use crate::targets::{BoxRegion, EvalCounts, Target};
use crate::WeightedSample;

/// Nondecreasing inverse temperatures ending at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureLadder {
    betas: Vec<f64>,
}

impl TemperatureLadder {
    /// `0, 2^-4, 2^-3.5, …, 2^-0.5, 1`.
    pub fn exponential() -> Self {
        let mut betas = vec![0.0];
        betas.extend((0..=8).map(|i| 2f64.powf(-4.0 + 0.5 * i as f64)));
        Self { betas }
    }

    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(invalid("inverse temperatures must lie in [0, 1]"));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) || *betas.last().unwrap() != 1.0 {
            return Err(invalid("ladder must be nondecreasing and end at 1"));
        }
        Ok(Self { betas })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

impl Default for TemperatureLadder {
    fn default() -> Self {
        Self::exponential()
    }
}

/// Offspring indices from one uniform `u ∈ [0, 1)`; `weights` must sum to one.
pub fn systematic_resample(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut j = 0;
    for i in 0..n {
        let pos = (i as f64 + u) / n as f64;
        while j < n - 1 && cum + weights[j] <= pos {
            cum += weights[j];
            j += 1;
        }
        out.push(j);
    }
    out
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

#[derive(Debug, Clone)]
pub enum SmcInit {
    /// Uniform over the box (the `β = 0` stage).
    Box(BoxRegion),
    /// Given particles, taken as draws from the first ladder stage.
    Particles(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct SmcOutput {
    pub sample: WeightedSample,
    /// ESS after each reweighting.
    pub ess: Vec<f64>,
    pub evals: EvalCounts,
}

fn particle_chain(
    i: usize,
    x: Vec<f64>,
    step: f64,
    seed: u64,
    target: &Target,
) -> Result<ChainHandle> {
    ChainHandle::new(
        i,
        SamplerParams::Mala { step },
        x,
        stream(seed, "smc-particle", i as u64),
        target,
    )
}

/// Annealed SMC: reweight by `p̂^{β_{k+1}−β_k}`, resample systematically,
/// then one MALA step per particle at `β_{k+1}`. A first stage with `β > 0`
/// also gets one MALA step.
pub fn run_smc(
    target: &Target,
    ladder: &TemperatureLadder,
    population: usize,
    step: f64,
    init: SmcInit,
    seed: u64,
) -> Result<SmcOutput> {
    let before = target.evals();
    let starts: Vec<Vec<f64>> = match init {
        SmcInit::Box(b) => {
            if population < 2 {
                return Err(invalid("SMC population must be at least 2"));
            }
            (0..population)
                .map(|i| draw_init(&b, target, &mut stream(seed, "smc-init", i as u64)))
                .collect()
        }
        SmcInit::Particles(p) => p,
    };
    if starts.len() < 2 {
        return Err(invalid("SMC population must be at least 2"));
    }
    let n = starts.len();
    let mut particles: Vec<ChainHandle> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, x)| particle_chain(i, x, step, seed, target))
        .collect::<Result<_>>()?;
    let betas = ladder.betas();
    let mut ess = Vec::with_capacity(betas.len());
    let mut resample_rng = stream(seed, "smc-resample", 0);
    if betas[0] > 0.0 {
        particles.par_iter_mut().for_each(|c| {
            mala_step(c, target, step, betas[0], None);
        });
    }
    for k in 1..betas.len() {
        let db = betas[k] - betas[k - 1];
        let logw: Vec<f64> = particles
            .iter()
            .map(|c| if db == 0.0 { 0.0 } else { db * c.log_density })
            .collect();
        let lse = log_sum_exp(&logw);
        if !lse.is_finite() {
            return Err(Error::WeightUnderflow { beta: betas[k] });
        }
        let w: Vec<f64> = logw.iter().map(|l| (l - lse).exp()).collect();
        ess.push(effective_sample_size(&w));
        let parents = systematic_resample(&w, resample_rng.random::<f64>());
        let states: Vec<(Vec<f64>, f64, Vec<f64>)> = parents
            .iter()
            .map(|&j| {
                (
                    particles[j].position.clone(),
                    particles[j].log_density,
                    particles[j].grad.clone(),
                )
            })
            .collect();
        for (c, (x, lp, g)) in particles.iter_mut().zip(states) {
            c.set_state(x, lp, g);
        }
        let beta = betas[k];
        particles.par_iter_mut().for_each(|c| {
            mala_step(c, target, step, beta, None);
        });
    }
    let points: Vec<Vec<f64>> = particles.iter().map(|c| c.position.clone()).collect();
    debug_assert_eq!(points.len(), n);
    Ok(SmcOutput {
        sample: WeightedSample::uniform(points)?,
        ess,
        evals: target.evals() - before,
    })
}

/// `log` of the replica-exchange acceptance probability for swapping the
/// states of the chains at `beta_i` and `beta_j`.
pub fn pt_swap_log_accept(beta_i: f64, beta_j: f64, lp_i: f64, lp_j: f64) -> f64 {
    let e = (beta_i - beta_j) * (lp_j - lp_i);
    if e.is_nan() {
        // both at the same temperature with infinite densities
        0.0
    } else {
        e.min(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct PtOutput {
    /// Cold-chain states, one per MALA step.
    pub sample: WeightedSample,
    /// Attempts and acceptances per adjacent pair `(k, k+1)`.
    pub swap_attempts: Vec<u64>,
    pub swap_accepts: Vec<u64>,
    pub evals: EvalCounts,
}

pub const DEFAULT_STEPS_PER_SWAP: usize = 25;

/// Parallel tempering: every chain makes `steps_per_swap` MALA steps at its
/// temperature, then adjacent pairs `(0,1), (1,2), …` attempt swaps in
/// order. Runs until the cold chain has produced `n_samples` states. The
/// `β = 0` chain is confined to `init_box`.
pub fn run_pt(
    target: &Target,
    ladder: &TemperatureLadder,
    step: f64,
    steps_per_swap: usize,
    n_samples: usize,
    init_box: &BoxRegion,
    seed: u64,
) -> Result<PtOutput> {
    if steps_per_swap == 0 || n_samples == 0 {
        return Err(invalid("steps per swap and sample count must be positive"));
    }
    let before = target.evals();
    let betas = ladder.betas().to_vec();
    let k = betas.len();
    let mut chains: Vec<ChainHandle> = (0..k)
        .map(|i| {
            let x = draw_init(init_box, target, &mut stream(seed, "pt-init", i as u64));
            ChainHandle::new(
                i,
                SamplerParams::Mala { step },
                x,
                stream(seed, "pt-chain", i as u64),
                target,
            )
        })
        .collect::<Result<_>>()?;
    let cold = k - 1;
    let mut swap_rng = stream(seed, "pt-swap", 0);
    let mut attempts = vec![0u64; k.saturating_sub(1)];
    let mut accepts = vec![0u64; k.saturating_sub(1)];
    let mut out = Vec::with_capacity(n_samples);
    while out.len() < n_samples {
        let cold_states: Vec<Vec<Vec<f64>>> = chains
            .par_iter_mut()
            .zip(betas.par_iter())
            .map(|(c, &beta)| {
                let support = (beta == 0.0).then_some(init_box);
                let mut states = Vec::new();
                for _ in 0..steps_per_swap {
                    mala_step(c, target, step, beta, support);
                    if c.id == cold {
                        states.push(c.position.clone());
                    }
                }
                states
            })
            .collect();
        out.extend(cold_states.into_iter().flatten());
        for i in 0..k.saturating_sub(1) {
            attempts[i] += 1;
            let la = pt_swap_log_accept(
                betas[i],
                betas[i + 1],
                chains[i].log_density,
                chains[i + 1].log_density,
            );
            let u: f64 = swap_rng.random();
            if u.ln() < la || la == 0.0 {
                accepts[i] += 1;
                let a = (
                    chains[i].position.clone(),
                    chains[i].log_density,
                    chains[i].grad.clone(),
                );
                let b = (
                    chains[i + 1].position.clone(),
                    chains[i + 1].log_density,
                    chains[i + 1].grad.clone(),
                );
                chains[i].set_state(b.0, b.1, b.2);
                chains[i + 1].set_state(a.0, a.1, a.2);
            }
        }
    }
    out.truncate(n_samples);
    Ok(PtOutput {
        sample: WeightedSample::uniform(out)?,
        swap_attempts: attempts,
        swap_accepts: accepts,
        evals: target.evals() - before,
    })
}

/// Mean of the resampled offspring counts over `draws` systematic resamplings.
pub fn mean_offspring(weights: &[f64], draws: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut counts = vec![0.0; weights.len()];
    for _ in 0..draws {
        for j in systematic_resample(weights, rng.random::<f64>()) {
            counts[j] += 1.0;
        }
    }
    counts.iter().map(|c| c / draws as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::standard_normal;

    #[test]
    fn exponential_ladder() {
        let l = TemperatureLadder::exponential();
        assert_eq!(l.len(), 10);
        assert_eq!(l.betas()[0], 0.0);
        assert_eq!(l.betas()[1], 0.0625);
        assert_eq!(l.betas()[9], 1.0);
        assert!(l.betas().windows(2).all(|w| w[0] < w[1]));
        assert!(TemperatureLadder::new(vec![0.5, 0.2, 1.0]).is_err());
        assert!(TemperatureLadder::new(vec![0.0, 0.5]).is_err());
    }

    #[test]
    fn systematic_resampling_is_unbiased() {
        let mut rng = stream(1, "rs", 0);
        let raw: Vec<f64> = (0..20).map(|_| 0.9 + 0.2 * rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|r| r / s).collect();
        let mean = mean_offspring(&w, 10_000, &mut rng);
        for (m, wi) in mean.iter().zip(&w) {
            let expected = 20.0 * wi;
            assert!((m - expected).abs() <= 0.02 * expected, "{m} vs {expected}");
        }
        assert_eq!(systematic_resample(&[0.0, 1.0, 0.0], 0.999), vec![1, 1, 1]);
    }

    #[test]
    fn ess_bounds() {
        assert_eq!(effective_sample_size(&[0.25; 4]), 4.0);
        assert_eq!(effective_sample_size(&[1.0, 0.0, 0.0]), 1.0);
        let t = standard_normal(2);
        let out = run_smc(
            &t,
            &TemperatureLadder::exponential(),
            200,
            0.5,
            SmcInit::Box(BoxRegion::cube(2, -6.0, 6.0)),
            3,
        )
        .unwrap();
        assert_eq!(out.ess.len(), 9);
        assert!(out.ess.iter().all(|e| (1.0..=200.0 + 1e-9).contains(e)));
        // initialization plus one MALA step per particle per stage
        assert_eq!(out.evals.density, 200 * 10);
        assert_eq!(t.evals(), out.evals);
    }

    #[test]
    fn single_stage_is_one_mala_step() {
        let t = standard_normal(1);
        let init: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 - 25.0) / 10.0]).collect();
        let ladder = TemperatureLadder::new(vec![1.0]).unwrap();
        let out = run_smc(&t, &ladder, 50, 0.7, SmcInit::Particles(init.clone()), 4).unwrap();
        for (i, x) in init.into_iter().enumerate() {
            let mut c = particle_chain(i, x, 0.7, 4, &t).unwrap();
            mala_step(&mut c, &t, 0.7, 1.0, None);
            assert_eq!(out.sample.points()[i], c.position);
        }
    }

    #[test]
    fn underflow_is_reported() {
        let t = Target::new(
            std::sync::Arc::new(crate::targets::UniformBox {
                region: BoxRegion::cube(1, 0.0, 1.0),
            }),
            None,
        );
        let parts = vec![vec![2.0], vec![3.0]];
        let ladder = TemperatureLadder::new(vec![0.5, 1.0]).unwrap();
        assert!(ChainHandle::new(
            0,
            SamplerParams::Mala { step: 0.1 },
            vec![2.0],
            stream(0, "x", 0),
            &t
        )
        .is_err());
        assert!(run_smc(&t, &ladder, 2, 0.1, SmcInit::Particles(parts), 0).is_err());
    }

    #[test]
    fn swap_formula() {
        assert_eq!(pt_swap_log_accept(1.0, 1.0, -3.0, -10.0), 0.0);
        assert_eq!(pt_swap_log_accept(0.5, 1.0, -1.0, -3.0), 0.0);
        assert_eq!(pt_swap_log_accept(0.5, 1.0, -3.0, -1.0), -1.0);
        let mut rng = stream(5, "swap", 0);
        for _ in 0..1000 {
            let (bi, bj): (f64, f64) = (rng.random(), rng.random());
            let (li, lj): (f64, f64) = (-10.0 * rng.random::<f64>(), -10.0 * rng.random::<f64>());
            let oracle = ((bi - bj) * (lj - li)).exp().min(1.0);
            assert_eq!(pt_swap_log_accept(bi, bj, li, lj).exp(), oracle);
        }
    }

    #[test]
    fn degenerate_ladder_always_swaps() {
        let t = standard_normal(2);
        let ladder = TemperatureLadder::new(vec![1.0; 4]).unwrap();
        let out = run_pt(&t, &ladder, 0.8, 5, 100, &BoxRegion::cube(2, -2.0, 2.0), 6).unwrap();
        assert_eq!(out.swap_accepts, out.swap_attempts);
        assert_eq!(out.sample.len(), 100);
    }

    #[test]
    fn swap_detailed_balance_on_a_grid() {
        // product target over a discrete toy space: flows across a swap balance exactly
        let lp = [-0.3, -2.0, -0.1, -5.0, -1.2];
        let (bi, bj) = (0.3, 1.0);
        for (x, &lx) in lp.iter().enumerate() {
            for (y, &ly) in lp.iter().enumerate() {
                let fwd = (bi * lx + bj * ly + pt_swap_log_accept(bi, bj, lx, ly)).exp();
                let back = (bi * ly + bj * lx + pt_swap_log_accept(bi, bj, ly, lx)).exp();
                assert!((fwd - back).abs() < 1e-15, "{x} {y}");
            }
        }
    }
}
