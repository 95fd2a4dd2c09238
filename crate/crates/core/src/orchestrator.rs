//! The top-level procedures.
//!
//! - [`run_ksd_ucb1`]: one bandit over all chains, output pooled uniformly.
//! - [`run_ksd_ucb1_m`]: chains assigned to known regions; a region is
//!   picked first, then a chain inside it; regions are reweighted at the end.
//! - [`run_ksd_mcmc_wr`]: regions are discovered each round by grouping
//!   chains whose latest batches overlap; the final sample is partitioned by
//!   k-means and reweighted cluster by cluster.
//!
//! All three spend exactly `rounds * batch_size` emitted draws, including
//! the one initialization batch per chain.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::bandit::{BanditState, BanditStrategy};
use crate::clustering::{group_chains, kmeans, merge_small_clusters, reweight, DEFAULT_N_NN};
use crate::error::{invalid, Result};
use crate::rng::{stream, StreamRng};
use crate::sample::sq_dist;
use crate::samplers::{make_sampler_pool, ChainHandle, PoolSpec};
use crate::stein::{block_ksd_with_scores, scores, KernelConfig};
use crate::targets::{EvalCounts, Target};
use crate::weighting::{
    log_region_mass, region_weights, spread, GammaCache, RegionWeights, DEFAULT_K_NN,
};
use crate::WeightedSample;

/// How a region (or chain cluster) is picked before the bandit picks a chain in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionStrategy {
    /// Uniformly at random.
    Equal,
    /// Proportional to the region weight.
    W,
    /// The largest average block KSD.
    Ksd,
    /// Proportional to weight times average block KSD.
    KsdW,
    /// Proportional to weight times spread.
    SigmaW,
}

impl RegionStrategy {
    pub const ALL: [RegionStrategy; 5] = [
        RegionStrategy::Equal,
        RegionStrategy::W,
        RegionStrategy::Ksd,
        RegionStrategy::KsdW,
        RegionStrategy::SigmaW,
    ];

    fn uses_weights(self) -> bool {
        matches!(
            self,
            RegionStrategy::W | RegionStrategy::KsdW | RegionStrategy::SigmaW
        )
    }

    fn uses_spread(self) -> bool {
        matches!(self, RegionStrategy::SigmaW)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pool: PoolSpec,
    /// Total rounds `T`, initialization included.
    pub rounds: usize,
    pub batch_size: usize,
    #[serde(default = "default_bandit")]
    pub bandit: BanditStrategy,
    #[serde(default = "default_strategy")]
    pub region_strategy: RegionStrategy,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k_nn")]
    pub k_nn: usize,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default = "default_n_nn")]
    pub n_nn: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub known_weights: Option<Vec<f64>>,
    /// Rounds between refreshes of in-run weight estimates.
    #[serde(default = "default_refresh")]
    pub weight_refresh: usize,
    /// Largest number of points per region used for in-run statistics.
    #[serde(default = "default_stats_cap")]
    pub stats_cap: usize,
    /// Emitted-sample counts at which to record the running estimate.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
}

fn default_bandit() -> BanditStrategy {
    BanditStrategy::Ucb1
}
fn default_strategy() -> RegionStrategy {
    RegionStrategy::Equal
}
fn default_alpha() -> f64 {
    0.99
}
fn default_k_nn() -> usize {
    DEFAULT_K_NN
}
fn default_n_nn() -> usize {
    DEFAULT_N_NN
}
fn default_refresh() -> usize {
    10
}
fn default_stats_cap() -> usize {
    2000
}

impl RunConfig {
    /// Defaults for everything except the pool and the budget.
    pub fn new(pool: PoolSpec, rounds: usize, batch_size: usize) -> Self {
        Self {
            pool,
            rounds,
            batch_size,
            bandit: default_bandit(),
            region_strategy: default_strategy(),
            alpha: default_alpha(),
            k_nn: default_k_nn(),
            kernel: KernelConfig::default(),
            n_nn: default_n_nn(),
            seed: 0,
            known_weights: None,
            weight_refresh: default_refresh(),
            stats_cap: default_stats_cap(),
            checkpoints: Vec::new(),
        }
    }

    /// Rounds needed to emit `n` draws in batches of `batch_size`.
    pub fn rounds_for(n: usize, batch_size: usize) -> usize {
        n.div_ceil(batch_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if self.rounds < self.pool.count {
            return Err(invalid(format!(
                "{} rounds cannot initialize {} chains",
                self.rounds, self.pool.count
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("Rényi order must lie in (0, 1)"));
        }
        if self.n_nn == 0 || self.k_nn == 0 || self.weight_refresh == 0 || self.stats_cap < 2 {
            return Err(invalid(
                "neighbour counts, refresh period and statistics cap must be positive",
            ));
        }
        self.kernel.validate()
    }

    pub fn total_samples(&self) -> usize {
        self.rounds * self.batch_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based; rounds `1..=M` are the initialization pulls.
    pub round: usize,
    pub region: Option<usize>,
    pub sampler: usize,
    pub raw_ksd: f64,
    /// Cumulative density evaluations of the run.
    pub density_evals: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub n_samples: usize,
    pub estimate: Vec<f64>,
    pub density_evals: u64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<RoundRecord>,
    pub sample: WeightedSample,
    pub region_weights: Option<RegionWeights>,
    pub pulls: Vec<u64>,
    pub checkpoints: Vec<Checkpoint>,
    pub evals: EvalCounts,
}

/// Per-region summary used by [`select_region`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub weight: f64,
    pub avg_ksd: f64,
    pub spread: f64,
}

/// Picks a region index according to `strategy`. Proportional strategies
/// fall back to a uniform draw when every score is zero.
pub fn select_region(strategy: RegionStrategy, stats: &[RegionStats], rng: &mut impl Rng) -> usize {
    let k = stats.len();
    if k <= 1 {
        return 0;
    }
    let scores: Vec<f64> = match strategy {
        RegionStrategy::Equal => return rng.random_range(0..k),
        RegionStrategy::Ksd => {
            let mut best = 0;
            for (i, s) in stats.iter().enumerate() {
                if s.avg_ksd > stats[best].avg_ksd {
                    best = i;
                }
            }
            return best;
        }
        RegionStrategy::W => stats.iter().map(|s| s.weight).collect(),
        RegionStrategy::KsdW => stats.iter().map(|s| s.weight * s.avg_ksd).collect(),
        RegionStrategy::SigmaW => stats.iter().map(|s| s.weight * s.spread).collect(),
    };
    match WeightedIndex::new(&scores) {
        Ok(w) => w.sample(rng),
        Err(_) => rng.random_range(0..k),
    }
}

pub fn estimate_mean(ws: &WeightedSample) -> Vec<f64> {
    ws.mean()
}

/// Mean squared Euclidean error of `estimates` against `truth`.
pub fn mse(estimates: &[Vec<f64>], truth: &[f64]) -> f64 {
    estimates.iter().map(|e| sq_dist(e, truth)).sum::<f64>() / estimates.len() as f64
}

/// Evenly strided subsample of at most `cap` points.
fn thin(points: &[Vec<f64>], cap: usize) -> Vec<Vec<f64>> {
    if points.len() <= cap {
        return points.to_vec();
    }
    (0..cap)
        .map(|i| points[i * points.len() / cap].clone())
        .collect()
}

/// Shared state of a run: chains, bandit, emitted draws and the trace.
struct Engine<'a> {
    target: &'a Target,
    cfg: &'a RunConfig,
    chains: Vec<ChainHandle>,
    bandit: Option<BanditState>,
    last: Vec<Vec<Vec<f64>>>,
    ksd_sum: Vec<f64>,
    ksd_count: Vec<u64>,
    emitted: Vec<Vec<f64>>,
    owner: Vec<usize>,
    records: Vec<RoundRecord>,
    start: EvalCounts,
    bandit_rng: StreamRng,
    region_rng: StreamRng,
}

impl<'a> Engine<'a> {
    fn new(target: &'a Target, cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        let start = target.evals();
        let chains = make_sampler_pool(&cfg.pool, cfg.seed, target)?;
        let m = chains.len();
        Ok(Self {
            target,
            cfg,
            chains,
            bandit: None,
            last: vec![Vec::new(); m],
            ksd_sum: vec![0.0; m],
            ksd_count: vec![0; m],
            emitted: Vec::with_capacity(cfg.total_samples()),
            owner: Vec::with_capacity(cfg.total_samples()),
            records: Vec::with_capacity(cfg.rounds),
            start,
            bandit_rng: stream(cfg.seed, "bandit", 0),
            region_rng: stream(cfg.seed, "region", 0),
        })
    }

    fn m(&self) -> usize {
        self.chains.len()
    }

    fn density_evals(&self) -> u64 {
        (self.target.evals() - self.start).density
    }

    /// Runs chain `i` for one batch and scores it.
    fn pull(&mut self, i: usize, region: Option<usize>) -> Result<f64> {
        let batch = self.chains[i].next_batch(self.target, self.cfg.batch_size)?;
        let sc = match batch.scores {
            Some(s) => s,
            None => scores(self.target.model().as_ref(), &batch.points)?,
        };
        let raw = block_ksd_with_scores(&batch.points, &sc, &self.cfg.kernel)?;
        self.ksd_sum[i] += raw;
        self.ksd_count[i] += 1;
        self.emitted.extend(batch.points.iter().cloned());
        self.owner
            .extend(std::iter::repeat_n(i, batch.points.len()));
        self.last[i] = batch.points;
        self.records.push(RoundRecord {
            round: self.records.len() + 1,
            region,
            sampler: i,
            raw_ksd: raw,
            density_evals: self.density_evals(),
        });
        Ok(raw)
    }

    fn initialize(&mut self, region_of: impl Fn(usize) -> Option<usize>) -> Result<()> {
        let raws = (0..self.m())
            .map(|i| self.pull(i, region_of(i)))
            .collect::<Result<Vec<f64>>>()?;
        self.bandit = Some(BanditState::initialize(&raws)?);
        Ok(())
    }

    fn choose(&mut self, candidates: &[usize]) -> usize {
        self.bandit.as_ref().expect("initialized").select(
            self.cfg.bandit,
            candidates,
            &mut self.bandit_rng,
        )
    }

    fn update(&mut self, i: usize, raw: f64) {
        self.bandit
            .as_mut()
            .expect("initialized")
            .normalize_and_update(i, raw);
    }

    fn pulls(&self) -> Vec<u64> {
        self.bandit
            .as_ref()
            .map(|b| b.arms().iter().map(|a| a.pulls).collect())
            .unwrap_or_default()
    }

    fn region_points(&self, samplers: &[usize]) -> Vec<Vec<f64>> {
        samplers
            .iter()
            .flat_map(|&s| self.chains[s].history().iter().cloned())
            .collect()
    }

    fn avg_ksd(&self, samplers: &[usize]) -> f64 {
        let sum: f64 = samplers.iter().map(|&s| self.ksd_sum[s]).sum();
        let n: u64 = samplers.iter().map(|&s| self.ksd_count[s]).sum();
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Log-mass of a region from a thinned copy of its draws; `None` when too few.
    fn region_beta(&self, samplers: &[usize], gamma: &GammaCache) -> Result<Option<f64>> {
        let pts = thin(&self.region_points(samplers), self.cfg.stats_cap);
        if pts.len() < self.cfg.k_nn + 2 {
            return Ok(None);
        }
        let g = gamma.get(self.target.dim(), self.cfg.k_nn, self.cfg.alpha)?;
        Ok(Some(log_region_mass(
            &pts,
            self.target.model().as_ref(),
            self.cfg.alpha,
            &g,
        )?))
    }

    fn emitted_so_far(&self) -> usize {
        self.emitted.len()
    }
}

/// Softmax of the available log-masses; regions without one get `1/K`.
fn weights_from_betas(betas: &[Option<f64>]) -> Result<Vec<f64>> {
    let k = betas.len();
    let known: Vec<f64> = betas.iter().flatten().copied().collect();
    if known.is_empty() {
        return Ok(vec![1.0 / k as f64; k]);
    }
    let w = region_weights(&known)?.weights;
    let share = (k - known.len()) as f64 / k as f64;
    let mut it = w.into_iter();
    Ok(betas
        .iter()
        .map(|b| {
            if b.is_some() {
                (1.0 - share) * it.next().unwrap()
            } else {
                1.0 / k as f64
            }
        })
        .collect())
}

/// Builds the output sample from the first `n` emitted draws.
type Finalize<'a> =
    dyn FnMut(&Engine, usize) -> Result<(WeightedSample, Option<RegionWeights>)> + 'a;

fn record_checkpoint(
    engine: &Engine,
    checkpoints: &mut Vec<Checkpoint>,
    finalize: &mut Finalize,
) -> Result<()> {
    let n = engine.emitted_so_far();
    if engine.cfg.checkpoints.contains(&n) && checkpoints.last().is_none_or(|c| c.n_samples != n) {
        let (ws, _) = finalize(engine, n)?;
        checkpoints.push(Checkpoint {
            n_samples: n,
            estimate: ws.mean(),
            density_evals: engine.density_evals(),
        });
    }
    Ok(())
}

fn finish(
    engine: Engine,
    mut checkpoints: Vec<Checkpoint>,
    finalize: &mut Finalize,
) -> Result<RunTrace> {
    let n = engine.emitted_so_far();
    let (sample, region_weights) = finalize(&engine, n)?;
    if engine.cfg.checkpoints.contains(&n) && checkpoints.last().is_none_or(|c| c.n_samples != n) {
        checkpoints.push(Checkpoint {
            n_samples: n,
            estimate: sample.mean(),
            density_evals: engine.density_evals(),
        });
    }
    Ok(RunTrace {
        records: engine.records.clone(),
        sample,
        region_weights,
        pulls: engine.pulls(),
        checkpoints,
        evals: engine.target.evals() - engine.start,
    })
}

/// One bandit over all chains; the output is every emitted draw, equally weighted.
pub fn run_ksd_ucb1(target: &Target, cfg: &RunConfig) -> Result<RunTrace> {
    let mut engine = Engine::new(target, cfg)?;
    let mut finalize =
        |e: &Engine, n: usize| Ok((WeightedSample::uniform(e.emitted[..n].to_vec())?, None));
    let mut checkpoints = Vec::new();
    engine.initialize(|_| None)?;
    record_checkpoint(&engine, &mut checkpoints, &mut finalize)?;
    let all: Vec<usize> = (0..engine.m()).collect();
    for _ in engine.m()..cfg.rounds {
        let i = engine.choose(&all);
        let raw = engine.pull(i, None)?;
        engine.update(i, raw);
        record_checkpoint(&engine, &mut checkpoints, &mut finalize)?;
    }
    finish(engine, checkpoints, &mut finalize)
}

/// Chains grouped into known regions (`region_of[i]` for chain `i`). Each
/// round picks a region by the configured strategy and a chain inside it by
/// the bandit. Region `k`'s draws get weight `w_k / n_k` in the output.
pub fn run_ksd_ucb1_m(
    target: &Target,
    cfg: &RunConfig,
    region_of: &[usize],
    gamma: &GammaCache,
) -> Result<RunTrace> {
    if region_of.len() != cfg.pool.count {
        return Err(invalid(format!(
            "{} region labels for {} chains",
            region_of.len(),
            cfg.pool.count
        )));
    }
    let k = region_of.iter().max().map_or(0, |m| m + 1);
    let members: Vec<Vec<usize>> = (0..k)
        .map(|r| {
            (0..region_of.len())
                .filter(|&i| region_of[i] == r)
                .collect()
        })
        .collect();
    if let Some(r) = members.iter().position(Vec::is_empty) {
        return Err(invalid(format!("region {r} has no samplers")));
    }
    if let Some(w) = &cfg.known_weights {
        if w.len() != k
            || w.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || w.iter().sum::<f64>() <= 0.0
        {
            return Err(invalid(
                "known weights must be one nonnegative value per region",
            ));
        }
    }
    let known = cfg.known_weights.as_ref().map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect::<Vec<f64>>()
    });

    let mut finalize = |e: &Engine, n: usize| -> Result<(WeightedSample, Option<RegionWeights>)> {
        let pts = &e.emitted[..n];
        let own = &e.owner[..n];
        let counts: Vec<usize> = (0..k)
            .map(|r| own.iter().filter(|&&o| region_of[o] == r).count())
            .collect();
        let rw = match &known {
            Some(w) => RegionWeights {
                betas: w.iter().map(|v| v.ln()).collect(),
                weights: w.clone(),
            },
            None => {
                let g = gamma.get(e.target.dim(), cfg.k_nn, cfg.alpha)?;
                let betas = (0..k)
                    .map(|r| {
                        let rp: Vec<Vec<f64>> = pts
                            .iter()
                            .zip(own)
                            .filter(|(_, &o)| region_of[o] == r)
                            .map(|(p, _)| p.clone())
                            .collect();
                        if rp.len() < cfg.k_nn + 2 {
                            Ok(None)
                        } else {
                            log_region_mass(&rp, e.target.model().as_ref(), cfg.alpha, &g).map(Some)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let weights = weights_from_betas(&betas)?;
                RegionWeights {
                    betas: betas.iter().map(|b| b.unwrap_or(f64::NAN)).collect(),
                    weights,
                }
            }
        };
        let wsum: f64 = (0..k)
            .filter(|&r| counts[r] > 0)
            .map(|r| rw.weights[r])
            .sum();
        let per_point: Vec<f64> = own
            .iter()
            .map(|&o| rw.weights[region_of[o]] / wsum / counts[region_of[o]] as f64)
            .collect();
        Ok((WeightedSample::new(pts.to_vec(), per_point)?, Some(rw)))
    };

    let mut engine = Engine::new(target, cfg)?;
    let mut checkpoints = Vec::new();
    engine.initialize(|i| Some(region_of[i]))?;
    record_checkpoint(&engine, &mut checkpoints, &mut finalize)?;
    let mut cached_w: Option<(usize, Vec<f64>)> = None;
    for round in engine.m() + 1..=cfg.rounds {
        let weights = if let Some(w) = &known {
            w.clone()
        } else if cfg.region_strategy.uses_weights() {
            match &cached_w {
                Some((at, w)) if round - at < cfg.weight_refresh => w.clone(),
                _ => {
                    let betas = members
                        .iter()
                        .map(|s| engine.region_beta(s, gamma))
                        .collect::<Result<Vec<_>>>()?;
                    let w = weights_from_betas(&betas)?;
                    cached_w = Some((round, w.clone()));
                    w
                }
            }
        } else {
            vec![1.0 / k as f64; k]
        };
        let stats: Vec<RegionStats> = members
            .iter()
            .enumerate()
            .map(|(r, s)| RegionStats {
                weight: weights[r],
                avg_ksd: engine.avg_ksd(s),
                spread: if cfg.region_strategy.uses_spread() {
                    spread(&thin(&engine.region_points(s), cfg.stats_cap))
                } else {
                    0.0
                },
            })
            .collect();
        let region = select_region(cfg.region_strategy, &stats, &mut engine.region_rng);
        let i = engine.choose(&members[region]);
        let raw = engine.pull(i, Some(region))?;
        engine.update(i, raw);
        record_checkpoint(&engine, &mut checkpoints, &mut finalize)?;
    }
    finish(engine, checkpoints, &mut finalize)
}

/// k-means the first `n` emitted draws into `M` clusters and reweight each
/// by its estimated log-mass.
fn cluster_and_reweight(
    e: &Engine,
    n: usize,
    gamma: &GammaCache,
) -> Result<(WeightedSample, Option<RegionWeights>)> {
    let cfg = e.cfg;
    let pts = &e.emitted[..n];
    let m = e.m().min(n);
    let mut rng = stream(cfg.seed, "kmeans", 0);
    let part = kmeans(pts, m, 100, &mut rng)?;
    let part = merge_small_clusters(pts, &part, cfg.k_nn + 2);
    let g = gamma.get(e.target.dim(), cfg.k_nn, cfg.alpha)?;
    let betas = part
        .members()
        .iter()
        .map(|idx| {
            let cp: Vec<Vec<f64>> = idx.iter().map(|&i| pts[i].clone()).collect();
            log_region_mass(&cp, e.target.model().as_ref(), cfg.alpha, &g)
        })
        .collect::<Result<Vec<f64>>>()?;
    let rw = region_weights(&betas)?;
    Ok((reweight(pts.to_vec(), &part, &rw.weights)?, Some(rw)))
}

/// Chains are regrouped every round by overlap of their latest batches; a
/// cluster is picked by the configured strategy and a chain inside it by
/// the bandit. With the uniform bandit, chains are simply taken in turn.
pub fn run_ksd_mcmc_wr(target: &Target, cfg: &RunConfig, gamma: &GammaCache) -> Result<RunTrace> {
    let mut finalize = |e: &Engine, n: usize| cluster_and_reweight(e, n, gamma);
    let mut engine = Engine::new(target, cfg)?;
    let mut checkpoints = Vec::new();
    engine.initialize(|_| None)?;
    record_checkpoint(&engine, &mut checkpoints, &mut finalize)?;
    let all: Vec<usize> = (0..engine.m()).collect();
    let mut beta_cache: HashMap<Vec<usize>, Option<f64>> = HashMap::new();
    let mut cache_born = engine.m() + 1;
    for round in engine.m() + 1..=cfg.rounds {
        if cfg.bandit == BanditStrategy::Uniform {
            let i = engine.choose(&all);
            let raw = engine.pull(i, None)?;
            engine.update(i, raw);
            record_checkpoint(&engine, &mut checkpoints, &mut finalize)?;
            continue;
        }
        let last: Vec<&[Vec<f64>]> = engine.last.iter().map(|b| b.as_slice()).collect();
        let grouping = group_chains(&last, cfg.n_nn)?;
        let clusters = &grouping.clusters;
        let weights = if cfg.region_strategy.uses_weights() && clusters.len() > 1 {
            if round - cache_born >= cfg.weight_refresh {
                beta_cache.clear();
                cache_born = round;
            }
            let mut betas = Vec::with_capacity(clusters.len());
            for c in clusters {
                let b = match beta_cache.get(c) {
                    Some(b) => *b,
                    None => {
                        let b = engine.region_beta(c, gamma)?;
                        beta_cache.insert(c.clone(), b);
                        b
                    }
                };
                betas.push(b);
            }
            weights_from_betas(&betas)?
        } else {
            vec![1.0 / clusters.len() as f64; clusters.len()]
        };
        let stats: Vec<RegionStats> = clusters
            .iter()
            .enumerate()
            .map(|(r, s)| RegionStats {
                weight: weights[r],
                avg_ksd: engine.avg_ksd(s),
                spread: if cfg.region_strategy.uses_spread() {
                    spread(&thin(&engine.region_points(s), cfg.stats_cap))
                } else {
                    0.0
                },
            })
            .collect();
        let region = select_region(cfg.region_strategy, &stats, &mut engine.region_rng);
        let i = engine.choose(&clusters[region]);
        let raw = engine.pull(i, Some(region))?;
        engine.update(i, raw);
        record_checkpoint(&engine, &mut checkpoints, &mut finalize)?;
    }
    finish(engine, checkpoints, &mut finalize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{SamplerKind, SamplerParams};
    use crate::targets::{standard_normal, BoxRegion};

    fn mala_pool(steps: Vec<f64>, d: usize) -> PoolSpec {
        PoolSpec::new(SamplerKind::Mala, 0, BoxRegion::cube(d, -2.0, 2.0)).with_steps(steps)
    }

    #[test]
    fn region_selection_rules() {
        let mut rng = stream(1, "sel", 0);
        let s = |w: f64, k: f64| RegionStats {
            weight: w,
            avg_ksd: k,
            spread: 1.0,
        };
        assert_eq!(
            select_region(RegionStrategy::KsdW, &[s(1.0, 1.0)], &mut rng),
            0
        );
        assert_eq!(
            select_region(
                RegionStrategy::Ksd,
                &[s(0.3, 0.3), s(0.3, 0.9), s(0.4, 0.1)],
                &mut rng
            ),
            1
        );
        let stats = [s(0.5, 0.0), s(0.3, 0.0), s(0.2, 0.0)];
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[select_region(RegionStrategy::W, &stats, &mut rng)] += 1;
        }
        for (c, w) in counts.iter().zip([0.5, 0.3, 0.2]) {
            assert!((*c as f64 / 1e5 - w).abs() < 0.01);
        }
        // all-zero proportional scores fall back to uniform
        let r = select_region(RegionStrategy::KsdW, &stats, &mut rng);
        assert!(r < 3);
    }

    #[test]
    fn mean_and_mse() {
        let ws = WeightedSample::uniform(vec![vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(estimate_mean(&ws), vec![1.0]);
        let ws = WeightedSample::new(vec![vec![0.0], vec![10.0]], vec![0.9, 0.1]).unwrap();
        assert_eq!(estimate_mean(&ws), vec![1.0]);
        assert_eq!(mse(&[vec![1.0, 0.0], vec![0.0, 3.0]], &[0.0, 0.0]), 5.0);
    }

    #[test]
    fn budget_and_trace_shape() {
        let t = standard_normal(2);
        let mut cfg = RunConfig::new(mala_pool(vec![0.2, 0.5, 1.0], 2), 40, 7);
        cfg.checkpoints = vec![70, 280];
        let tr = run_ksd_ucb1(&t, &cfg).unwrap();
        assert_eq!(tr.sample.len(), 280);
        assert_eq!(tr.records.len(), 40);
        assert_eq!(tr.pulls.iter().sum::<u64>(), 40);
        assert_eq!(
            tr.checkpoints
                .iter()
                .map(|c| c.n_samples)
                .collect::<Vec<_>>(),
            vec![70, 280]
        );
        assert!(tr
            .records
            .windows(2)
            .all(|w| w[0].density_evals <= w[1].density_evals));
        assert_eq!(tr.evals, t.evals());
    }

    #[test]
    fn uniform_bandit_round_robin() {
        let t = standard_normal(2);
        let mut cfg = RunConfig::new(mala_pool(vec![0.2, 0.5, 1.0, 1.5], 2), 23, 5);
        cfg.bandit = BanditStrategy::Uniform;
        let tr = run_ksd_ucb1(&t, &cfg).unwrap();
        let (lo, hi) = (
            tr.pulls.iter().min().unwrap(),
            tr.pulls.iter().max().unwrap(),
        );
        assert!(hi - lo <= 1);
    }

    #[test]
    fn single_chain_matches_direct_sampling() {
        let t = standard_normal(2);
        let cfg = RunConfig::new(mala_pool(vec![0.8], 2), 30, 10);
        let tr = run_ksd_ucb1(&t, &cfg).unwrap();
        let direct_t = t.fresh();
        let mut chain = make_sampler_pool(&cfg.pool, cfg.seed, &direct_t)
            .unwrap()
            .remove(0);
        assert_eq!(chain.params(), &SamplerParams::Mala { step: 0.8 });
        let mut pts = Vec::new();
        for _ in 0..30 {
            pts.extend(chain.next_batch(&direct_t, 10).unwrap().points);
        }
        assert_eq!(tr.sample.points(), pts.as_slice());
    }

    #[test]
    fn runs_are_deterministic() {
        let t = standard_normal(2);
        let mut cfg = RunConfig::new(mala_pool(vec![0.3, 0.9, 2.0], 2), 30, 10);
        cfg.bandit = BanditStrategy::EpsGreedy;
        cfg.region_strategy = RegionStrategy::SigmaW;
        let g = GammaCache::in_memory().with_calibration(crate::weighting::Calibration {
            n: 1000,
            repeats: 2,
        });
        let a = run_ksd_mcmc_wr(&t.fresh(), &cfg, &g).unwrap();
        let b = run_ksd_mcmc_wr(&t.fresh(), &cfg, &g).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.sample, b.sample);
        assert_eq!(a.sample.len(), 300);
    }

    #[test]
    fn known_regions_with_known_weights() {
        let t = standard_normal(1);
        let mut cfg = RunConfig::new(mala_pool(vec![0.5, 0.5], 1), 200, 5);
        cfg.known_weights = Some(vec![0.25, 0.75]);
        let g = GammaCache::in_memory();
        let tr = run_ksd_ucb1_m(&t, &cfg, &[0, 1], &g).unwrap();
        let w = tr.sample.weights();
        let owner: Vec<usize> = tr
            .records
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.sampler, 5))
            .collect();
        let mass0: f64 = w
            .iter()
            .zip(&owner)
            .filter(|(_, &o)| o == 0)
            .map(|(w, _)| w)
            .sum();
        assert!((mass0 - 0.25).abs() < 1e-12);
        let picks0 = tr.records.iter().filter(|r| r.region == Some(0)).count() as f64;
        assert!((picks0 - 100.0).abs() < 4.0 * 200f64.sqrt() / 2.0);
        assert!(run_ksd_ucb1_m(&t, &cfg, &[1, 1], &g).is_err());
    }

    #[test]
    fn co_located_chains_reduce_to_single_bandit() {
        let t = standard_normal(2);
        let mut cfg = RunConfig::new(mala_pool(vec![0.6, 0.9, 1.2], 2), 40, 10);
        cfg.init_tight();
        cfg.n_nn = 29;
        let g = GammaCache::in_memory().with_calibration(crate::weighting::Calibration {
            n: 1000,
            repeats: 2,
        });
        let a = run_ksd_mcmc_wr(&t.fresh(), &cfg, &g).unwrap();
        let b = run_ksd_ucb1(&t.fresh(), &cfg).unwrap();
        let seq = |tr: &RunTrace| tr.records.iter().map(|r| r.sampler).collect::<Vec<_>>();
        assert_eq!(seq(&a), seq(&b));
    }

    impl RunConfig {
        fn init_tight(&mut self) {
            self.pool.init_box = BoxRegion::cube(self.pool.init_box.dim(), -0.1, 0.1);
        }
    }
}
