//! Population baselines run at the density-evaluation budget of the
//! combined sampler.

use ksd_mcmc::baselines::{run_pt, run_smc, SmcInit, TemperatureLadder};
use ksd_mcmc::orchestrator::run_ksd_mcmc_wr;
use ksd_mcmc::rng::{child_seed, stream};
use ksd_mcmc::samplers::RANDOM_STEP_RANGE;
use ksd_mcmc::weighting::GammaCache;
use rand::Rng;

use super::{trace_rows, Metric};
use crate::config::{BaselineSection, BuiltTarget, ExperimentConfig};
use crate::error::Result;
use crate::output::Row;

const PILOT_POPULATION: usize = 2;
const PILOT_COLD_SAMPLES: usize = 200;

/// Step sizes of the baseline population, fixed across replicates.
pub fn baseline_steps(section: &BaselineSection) -> Vec<f64> {
    section.steps.clone().unwrap_or_else(|| {
        let mut rng = stream(section.params_seed, "baseline-steps", 0);
        (0..section.count)
            .map(|_| rng.random_range(RANDOM_STEP_RANGE.0..=RANDOM_STEP_RANGE.1))
            .collect()
    })
}

pub(super) fn replicate(
    cfg: &ExperimentConfig,
    bt: &BuiltTarget,
    seed: u64,
    gamma: &GammaCache,
) -> Result<Vec<Row>> {
    let section = cfg.baselines.as_ref().expect("validated");
    let run = cfg.run_config(seed)?;
    let metric = Metric::for_target(bt)?;
    let trace = run_ksd_mcmc_wr(&bt.target.fresh(), &run, gamma)?;
    let mut rows = Vec::new();
    if cfg.wants("ksd-mcmc-wr") {
        rows.extend(trace_rows("ksd-mcmc-wr", seed, &trace, &metric));
    }
    let ladder = match &section.ladder {
        Some(b) => TemperatureLadder::new(b.clone())?,
        None => TemperatureLadder::exponential(),
    };
    for (j, step) in baseline_steps(section).into_iter().enumerate() {
        let smc_name = format!("smc-{j}-step={step}");
        let pt_name = format!("pt-{j}-step={step}");
        let smc_seed = child_seed(seed, "smc", j as u64);
        let pt_seed = child_seed(seed, "pt", j as u64);
        let run_smc_with = |population: usize| {
            let target = bt.target.fresh();
            run_smc(
                &target,
                &ladder,
                population,
                step,
                SmcInit::Box(section.init_box.clone()),
                smc_seed,
            )
        };
        let run_pt_with = |n: usize| {
            let target = bt.target.fresh();
            run_pt(
                &target,
                &ladder,
                step,
                section.steps_per_swap,
                n,
                &section.init_box,
                pt_seed,
            )
        };
        let smc_rate = if section.smc && cfg.wants(&smc_name) {
            Some(run_smc_with(PILOT_POPULATION)?.evals.density as f64 / PILOT_POPULATION as f64)
        } else {
            None
        };
        let pt_rate = if section.pt && cfg.wants(&pt_name) {
            Some(run_pt_with(PILOT_COLD_SAMPLES)?.evals.density as f64 / PILOT_COLD_SAMPLES as f64)
        } else {
            None
        };
        for cp in &trace.checkpoints {
            let budget = cp.density_evals as f64;
            if let Some(rate) = smc_rate {
                let out = run_smc_with(matched_count(budget, rate, PILOT_POPULATION))?;
                rows.push(baseline_row(
                    &smc_name,
                    seed,
                    cp.n_samples,
                    &metric,
                    &out.sample.mean(),
                    out.evals.density,
                ));
            }
            if let Some(rate) = pt_rate {
                let out = run_pt_with(matched_count(budget, rate, 1))?;
                rows.push(baseline_row(
                    &pt_name,
                    seed,
                    cp.n_samples,
                    &metric,
                    &out.sample.mean(),
                    out.evals.density,
                ));
            }
        }
    }
    Ok(rows)
}

fn matched_count(budget: f64, per_unit: f64, min: usize) -> usize {
    ((budget / per_unit).floor() as usize).max(min)
}

fn baseline_row(
    method: &str,
    seed: u64,
    n: usize,
    metric: &Metric,
    est: &[f64],
    evals: u64,
) -> Row {
    Row {
        method: method.to_string(),
        seed,
        n_samples: n,
        metric: metric.score(est),
        density_evals: evals,
    }
}
