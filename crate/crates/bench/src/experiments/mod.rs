//! The experiment drivers behind each command.
//!
//! Every experiment runs `repeats` independent replicates in parallel. A
//! replicate gets its own seed derived from the master seed and produces a
//! list of rows; rows are merged and sorted so the output does not depend on
//! the thread schedule.

mod baselines;
mod block;
mod weights;

use ksd_mcmc::bandit::BanditStrategy;
use ksd_mcmc::orchestrator::{
    run_ksd_mcmc_wr, run_ksd_ucb1, run_ksd_ucb1_m, RegionStrategy, RunConfig, RunTrace,
};
use ksd_mcmc::rng::child_seed;
use ksd_mcmc::samplers::{make_sampler_pool, PoolSpec, SamplerParams};
use ksd_mcmc::weighting::GammaCache;
use rayon::prelude::*;

use crate::config::{BuiltTarget, ExperimentConfig, ExperimentKind};
use crate::error::{BenchError, Result};
use crate::output::{sort_rows, Row};

/// Seed of replicate `index`.
pub fn replicate_seed(master: u64, index: usize) -> u64 {
    child_seed(master, "replicate", index as u64)
}

/// Runs every replicate of `cfg` and returns the sorted rows.
pub fn run_experiment(cfg: &ExperimentConfig, gamma: &GammaCache) -> Result<Vec<Row>> {
    let built = cfg.target.build()?;
    let results: Vec<Result<Vec<Row>>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|index| {
            let seed = replicate_seed(cfg.seed, index);
            replicate(cfg, &built, seed, gamma).map_err(|e| BenchError::Replicate {
                index,
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    sort_rows(&mut rows);
    Ok(rows)
}

fn replicate(
    cfg: &ExperimentConfig,
    bt: &BuiltTarget,
    seed: u64,
    gamma: &GammaCache,
) -> Result<Vec<Row>> {
    use ExperimentKind::*;
    match cfg.experiment {
        BlockAgreement => block::replicate(cfg, bt, seed),
        Unimodal => unimodal(cfg, bt, seed),
        MultimodalOracle => multimodal_oracle(cfg, bt, seed, gamma),
        MultimodalGeneral => multimodal_general(cfg, bt, seed, gamma),
        WeightComparison => weights::replicate(cfg, bt, seed, gamma),
        ParallelBaselines => baselines::replicate(cfg, bt, seed, gamma),
        SamplerCount => sampler_count(cfg, bt, seed, gamma),
        Sensor => sensor(cfg, bt, seed, gamma),
    }
}

/// How an estimate is scored.
#[derive(Debug, Clone)]
pub(crate) enum Metric {
    /// Squared Euclidean error against the true mean.
    SquaredError(Vec<f64>),
    /// Mean over sensors of the distance to the true position.
    Localization(Vec<f64>),
}

impl Metric {
    pub(crate) fn for_target(bt: &BuiltTarget) -> Result<Self> {
        if let Some(p) = &bt.positions {
            return Ok(Metric::Localization(p.clone()));
        }
        bt.target
            .mean_truth()
            .map(|m| Metric::SquaredError(m.to_vec()))
            .ok_or_else(|| BenchError::Config("target has no ground truth to score against".into()))
    }

    pub(crate) fn score(&self, estimate: &[f64]) -> f64 {
        match self {
            Metric::SquaredError(truth) => estimate
                .iter()
                .zip(truth)
                .map(|(a, b)| (a - b).powi(2))
                .sum(),
            Metric::Localization(truth) => {
                let n = truth.len() / 2;
                (0..n)
                    .map(|s| {
                        ((estimate[2 * s] - truth[2 * s]).powi(2)
                            + (estimate[2 * s + 1] - truth[2 * s + 1]).powi(2))
                        .sqrt()
                    })
                    .sum::<f64>()
                    / n as f64
            }
        }
    }
}

pub(crate) fn trace_rows(method: &str, seed: u64, trace: &RunTrace, metric: &Metric) -> Vec<Row> {
    trace
        .checkpoints
        .iter()
        .map(|c| Row {
            method: method.to_string(),
            seed,
            n_samples: c.n_samples,
            metric: metric.score(&c.estimate),
            density_evals: c.density_evals,
        })
        .collect()
}

/// Chain `index` of the pool run alone for the whole budget, exactly as it
/// would start inside the pool.
pub(crate) fn single_chain_rows(
    method: &str,
    bt: &BuiltTarget,
    run: &RunConfig,
    index: usize,
    metric: &Metric,
) -> Result<Vec<Row>> {
    let target = bt.target.fresh();
    let mut chain = make_sampler_pool(&run.pool, run.seed, &target)?.swap_remove(index);
    let d = target.dim();
    let mut sum = vec![0.0; d];
    let mut emitted = 0;
    let mut rows = Vec::new();
    let total = run.rounds * run.batch_size;
    while emitted < total {
        let batch = chain.next_batch(&target, run.batch_size)?;
        for p in &batch.points {
            for (s, v) in sum.iter_mut().zip(p) {
                *s += v;
            }
        }
        emitted += batch.points.len();
        if run.checkpoints.contains(&emitted) {
            let est: Vec<f64> = sum.iter().map(|s| s / emitted as f64).collect();
            rows.push(Row {
                method: method.to_string(),
                seed: run.seed,
                n_samples: emitted,
                metric: metric.score(&est),
                density_evals: chain.evals().density,
            });
        }
    }
    Ok(rows)
}

fn single_label(pool: &PoolSpec, index: usize) -> Result<String> {
    Ok(match pool.params()?[index] {
        SamplerParams::Mh { step } | SamplerParams::Mala { step } => {
            format!("single-{index}-step={step}")
        }
        SamplerParams::Nuts(_) => format!("single-{index}"),
    })
}

fn singles(
    cfg: &ExperimentConfig,
    bt: &BuiltTarget,
    run: &RunConfig,
    metric: &Metric,
) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for i in 0..run.pool.count {
        let label = single_label(&run.pool, i)?;
        if cfg.wants(&label) {
            rows.extend(single_chain_rows(&label, bt, run, i, metric)?);
        }
    }
    Ok(rows)
}

fn with_bandit(run: &RunConfig, bandit: BanditStrategy, strategy: RegionStrategy) -> RunConfig {
    RunConfig {
        bandit,
        region_strategy: strategy,
        ..run.clone()
    }
}

pub(crate) fn strategy_name(s: RegionStrategy) -> &'static str {
    match s {
        RegionStrategy::Equal => "equal",
        RegionStrategy::W => "w",
        RegionStrategy::Ksd => "ksd",
        RegionStrategy::KsdW => "ksdw",
        RegionStrategy::SigmaW => "sigmaw",
    }
}

fn unimodal(cfg: &ExperimentConfig, bt: &BuiltTarget, seed: u64) -> Result<Vec<Row>> {
    let run = cfg.run_config(seed)?;
    let metric = Metric::for_target(bt)?;
    let mut rows = Vec::new();
    for (name, bandit) in [
        ("ksd-ucb1", BanditStrategy::Ucb1),
        ("eps-greedy", BanditStrategy::EpsGreedy),
        ("uniform", BanditStrategy::Uniform),
    ] {
        if cfg.wants(name) {
            let trace = run_ksd_ucb1(
                &bt.target.fresh(),
                &with_bandit(&run, bandit, run.region_strategy),
            )?;
            rows.extend(trace_rows(name, seed, &trace, &metric));
        }
    }
    rows.extend(singles(cfg, bt, &run, &metric)?);
    Ok(rows)
}

fn multimodal_oracle(
    cfg: &ExperimentConfig,
    bt: &BuiltTarget,
    seed: u64,
    gamma: &GammaCache,
) -> Result<Vec<Row>> {
    let oracle = cfg.oracle.as_ref().expect("validated");
    let run = cfg.run_config(seed)?;
    let metric = Metric::for_target(bt)?;
    let known = bt.mixture.as_ref().map(|m| m.mode_weights());
    let mut rows = Vec::new();
    for &strategy in &oracle.strategies {
        let modes = [
            ("known", oracle.known_weights),
            ("estimated", oracle.estimated_weights),
        ];
        for (suffix, enabled) in modes {
            let name = format!("{}-{suffix}", strategy_name(strategy));
            if !enabled || !cfg.wants(&name) {
                continue;
            }
            let mut rc = RunConfig {
                region_strategy: strategy,
                ..run.clone()
            };
            if suffix == "known" {
                rc.known_weights = Some(known.clone().ok_or_else(|| {
                    BenchError::Config("known weights need a mixture target".into())
                })?);
            }
            let trace = run_ksd_ucb1_m(&bt.target.fresh(), &rc, &oracle.regions, gamma)?;
            rows.extend(trace_rows(&name, seed, &trace, &metric));
        }
    }
    Ok(rows)
}

/// The combination methods compared on unknown-mode targets.
pub(crate) const GENERAL_VARIANTS: [(&str, BanditStrategy, RegionStrategy); 4] = [
    ("wr-ucb1-equal", BanditStrategy::Ucb1, RegionStrategy::Equal),
    ("wr-ucb1-ksdw", BanditStrategy::Ucb1, RegionStrategy::KsdW),
    (
        "wr-eps-equal",
        BanditStrategy::EpsGreedy,
        RegionStrategy::Equal,
    ),
    (
        "wr-eps-ksdw",
        BanditStrategy::EpsGreedy,
        RegionStrategy::KsdW,
    ),
];

fn multimodal_general(
    cfg: &ExperimentConfig,
    bt: &BuiltTarget,
    seed: u64,
    gamma: &GammaCache,
) -> Result<Vec<Row>> {
    let run = cfg.run_config(seed)?;
    let metric = Metric::for_target(bt)?;
    let mut rows = Vec::new();
    if cfg.wants("uniform") {
        let trace = run_ksd_ucb1(
            &bt.target.fresh(),
            &with_bandit(&run, BanditStrategy::Uniform, RegionStrategy::Equal),
        )?;
        rows.extend(trace_rows("uniform", seed, &trace, &metric));
    }
    if cfg.wants("uniform+clustering") {
        let rc = with_bandit(&run, BanditStrategy::Uniform, RegionStrategy::Equal);
        let trace = run_ksd_mcmc_wr(&bt.target.fresh(), &rc, gamma)?;
        rows.extend(trace_rows("uniform+clustering", seed, &trace, &metric));
    }
    for (name, bandit, strategy) in GENERAL_VARIANTS {
        if cfg.wants(name) {
            let trace = run_ksd_mcmc_wr(
                &bt.target.fresh(),
                &with_bandit(&run, bandit, strategy),
                gamma,
            )?;
            rows.extend(trace_rows(name, seed, &trace, &metric));
        }
    }
    rows.extend(singles(cfg, bt, &run, &metric)?);
    Ok(rows)
}

fn sampler_count(
    cfg: &ExperimentConfig,
    bt: &BuiltTarget,
    seed: u64,
    gamma: &GammaCache,
) -> Result<Vec<Row>> {
    let counts = cfg.counts.as_ref().expect("validated");
    let base = cfg.run_config(seed)?;
    let metric = Metric::for_target(bt)?;
    let mut rows = Vec::new();
    for &m in &counts.pool_sizes {
        let run = RunConfig {
            pool: PoolSpec {
                count: m,
                starts: None,
                steps: None,
                ..base.pool.clone()
            },
            ..base.clone()
        };
        let wr = format!("wr-m{m:03}");
        if cfg.wants(&wr) {
            rows.extend(trace_rows(
                &wr,
                seed,
                &run_ksd_mcmc_wr(&bt.target.fresh(), &run, gamma)?,
                &metric,
            ));
        }
        let uni = format!("uniform-m{m:03}");
        if cfg.wants(&uni) {
            let rc = with_bandit(&run, BanditStrategy::Uniform, RegionStrategy::Equal);
            rows.extend(trace_rows(
                &uni,
                seed,
                &run_ksd_ucb1(&bt.target.fresh(), &rc)?,
                &metric,
            ));
        }
    }
    Ok(rows)
}

fn sensor(
    cfg: &ExperimentConfig,
    bt: &BuiltTarget,
    seed: u64,
    gamma: &GammaCache,
) -> Result<Vec<Row>> {
    let run = cfg.run_config(seed)?;
    let metric = Metric::for_target(bt)?;
    let mut rows = Vec::new();
    if cfg.wants("ksd-mcmc-wr") {
        rows.extend(trace_rows(
            "ksd-mcmc-wr",
            seed,
            &run_ksd_mcmc_wr(&bt.target.fresh(), &run, gamma)?,
            &metric,
        ));
    }
    if cfg.wants("uniform") {
        let rc = with_bandit(&run, BanditStrategy::Uniform, RegionStrategy::Equal);
        rows.extend(trace_rows(
            "uniform",
            seed,
            &run_ksd_ucb1(&bt.target.fresh(), &rc)?,
            &metric,
        ));
    }
    rows.extend(singles(cfg, bt, &run, &metric)?);
    Ok(rows)
}
