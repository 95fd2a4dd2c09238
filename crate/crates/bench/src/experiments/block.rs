//! Ranking agreement of block-averaged KSD across block sizes.

use ksd_mcmc::samplers::{make_sampler_pool, PoolSpec};
use ksd_mcmc::stein::{average_block_ksd, scores, KernelConfig};

use crate::config::{BuiltTarget, ExperimentConfig};
use crate::error::Result;
use crate::output::Row;

/// One replicate is one pair of samplers with random step sizes drawn from
/// the replicate seed.
pub(super) fn replicate(cfg: &ExperimentConfig, bt: &BuiltTarget, seed: u64) -> Result<Vec<Row>> {
    let block = cfg.block.as_ref().expect("validated");
    let target = bt.target.fresh();
    let pool = PoolSpec {
        params_seed: seed,
        ..PoolSpec::new(block.sampler, 2, block.init_box.clone())
    };
    let mut chains = make_sampler_pool(&pool, seed, &target)?;
    let mut draws = Vec::with_capacity(2);
    let mut evals = 0;
    for chain in &mut chains {
        let points = chain.next_batch(&target, block.draws)?.points;
        evals += chain.evals().density;
        let s = scores(target.model().as_ref(), &points)?;
        draws.push((points, s));
    }
    let base = cfg.run.as_ref().map(|r| r.kernel).unwrap_or_default();
    let mut rows = Vec::new();
    for &h in &block.widths {
        let kernel = KernelConfig { h, ..base };
        let diff_at = |n_b: usize| -> Result<f64> {
            Ok(average_block_ksd(&draws[0].0, &draws[0].1, n_b, &kernel)?
                - average_block_ksd(&draws[1].0, &draws[1].1, n_b, &kernel)?)
        };
        let reference = diff_at(block.reference_block)?.signum();
        for &n_b in &block.block_sizes {
            let diff = diff_at(n_b)?;
            let agree = if diff.signum() == reference || diff == 0.0 || reference == 0.0 {
                1.0
            } else {
                0.0
            };
            for (kind, metric) in [("agree", agree), ("diff", diff)] {
                let method = format!("{kind}-h={h}");
                if cfg.wants(&method) {
                    rows.push(Row {
                        method,
                        seed,
                        n_samples: n_b,
                        metric,
                        density_evals: evals,
                    });
                }
            }
        }
    }
    Ok(rows)
}
