//! Final-weight estimators compared on the same pooled draws.

use ksd_mcmc::bandit::BanditStrategy;
use ksd_mcmc::clustering::{
    kmeans, merge_small_clusters, nearest_centroid, reweight, FinalPartition,
};
use ksd_mcmc::orchestrator::{run_ksd_ucb1, RegionStrategy, RunConfig};
use ksd_mcmc::rng::stream;
use ksd_mcmc::targets::LogDensity;
use ksd_mcmc::weighting::{
    gaussian_log_mass, importance_weight_estimate, log_region_mass, region_weights, GammaCache,
};

use super::Metric;
use crate::config::{BuiltTarget, ExperimentConfig};
use crate::error::Result;
use crate::output::Row;

/// Draws come from a round-robin pool; at every checkpoint the prefix is
/// clustered once and each estimator turns the clusters into weights.
pub(super) fn replicate(
    cfg: &ExperimentConfig,
    bt: &BuiltTarget,
    seed: u64,
    gamma: &GammaCache,
) -> Result<Vec<Row>> {
    let section = cfg.weights.as_ref().expect("validated");
    let run = RunConfig {
        bandit: BanditStrategy::Uniform,
        region_strategy: RegionStrategy::Equal,
        ..cfg.run_config(seed)?
    };
    let metric = Metric::for_target(bt)?;
    let target = bt.target.fresh();
    let trace = run_ksd_ucb1(&target, &run)?;
    let model: &dyn LogDensity = target.model().as_ref();
    let d = target.dim();
    let mut rows = Vec::new();
    for cp in &trace.checkpoints {
        let pts = &trace.sample.points()[..cp.n_samples];
        let part = kmeans(
            pts,
            run.pool.count.min(pts.len()),
            100,
            &mut stream(seed, "kmeans", cp.n_samples as u64),
        )?;
        let part = merge_small_clusters(pts, &part, run.k_nn + 2);
        let members = part.members();
        let clusters: Vec<Vec<Vec<f64>>> = members
            .iter()
            .map(|idx| idx.iter().map(|&i| pts[i].clone()).collect())
            .collect();

        let mut estimators: Vec<(String, Vec<f64>)> = Vec::new();
        if cfg.wants("count") {
            estimators.push((
                "count".into(),
                clusters.iter().map(|c| (c.len() as f64).ln()).collect(),
            ));
        }
        for &alpha in &section.alphas {
            let name = format!("renyi-a{alpha}");
            if cfg.wants(&name) {
                let g = gamma.get(d, run.k_nn, alpha)?;
                let betas = clusters
                    .iter()
                    .map(|c| log_region_mass(c, model, alpha, &g))
                    .collect::<ksd_mcmc::Result<_>>()?;
                estimators.push((name, betas));
            }
        }
        if cfg.wants("gaussian") {
            let betas = clusters
                .iter()
                .map(|c| gaussian_log_mass(c, model))
                .collect::<ksd_mcmc::Result<_>>()?;
            estimators.push(("gaussian".into(), betas));
        }
        if cfg.wants("importance") {
            estimators.push((
                "importance".into(),
                importance_betas(
                    &clusters,
                    &part,
                    model,
                    section.importance_draws,
                    seed,
                    cp.n_samples,
                )?,
            ));
        }

        for (name, betas) in estimators {
            let w = region_weights(&betas)?;
            let est = reweight(pts.to_vec(), &part, &w.weights)?.mean();
            rows.push(Row {
                method: name,
                seed,
                n_samples: cp.n_samples,
                metric: metric.score(&est),
                density_evals: cp.density_evals,
            });
        }
    }
    Ok(rows)
}

fn importance_betas(
    clusters: &[Vec<Vec<f64>>],
    part: &FinalPartition,
    model: &dyn LogDensity,
    draws: usize,
    seed: u64,
    n: usize,
) -> Result<Vec<f64>> {
    clusters
        .iter()
        .enumerate()
        .map(|(r, c)| {
            let mut rng = stream(seed, "importance", (n * clusters.len() + r) as u64);
            let in_region = |x: &[f64]| nearest_centroid(x, &part.centroids) == r;
            Ok(importance_weight_estimate(c, model, in_region, draws, &mut rng)?.log_mass)
        })
        .collect()
}
