use ksd_mcmc::rng::stream;
use ksd_mcmc::samplers::{ChainHandle, NutsSettings, SamplerParams};
use ksd_mcmc::targets::{
    standard_normal, temper, GaussianMixture, GaussianMixtureSpec, MixtureComponent, Target,
};
use rand::Rng;
use rand_distr::StandardNormal;

fn run(
    params: SamplerParams,
    init: Vec<f64>,
    target: &Target,
    steps: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut chain = ChainHandle::new(0, params, init, stream(seed, "chain", 0), target).unwrap();
    let mut out = Vec::with_capacity(steps);
    while out.len() < steps {
        out.extend(
            chain
                .next_batch(target, 1000.min(steps - out.len()))
                .unwrap()
                .points,
        );
    }
    out
}

/// Standard error of the mean by non-overlapping batch means.
fn batch_means_se(values: &[f64], batches: usize) -> f64 {
    let len = values.len() / batches;
    let means: Vec<f64> = values
        .chunks_exact(len)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (var / means.len() as f64).sqrt()
}

fn skewed_1d() -> Target {
    GaussianMixture::new(GaussianMixtureSpec {
        components: vec![
            MixtureComponent {
                weight: 0.6,
                mean: vec![-1.0],
                variance: 0.5,
            },
            MixtureComponent {
                weight: 0.4,
                mean: vec![1.5],
                variance: 0.3,
            },
        ],
    })
    .unwrap()
    .into_target()
}

/// Bins a stationary run onto a 51-cell grid and compares the flow a→b
/// with the flow b→a on every pair with enough traffic.
fn assert_binned_flows_balance(params: SamplerParams, seed: u64) {
    let target = skewed_1d();
    let (lo, hi, cells) = (-4.0, 4.0, 51usize);
    let cell =
        |x: f64| (((x - lo) / (hi - lo) * cells as f64).floor().max(0.0) as usize).min(cells - 1);
    let start = target.model().log_density(&[-1.0]);
    assert!(start.is_finite());
    let path = run(params, vec![-1.0], &target, 1_000_000, seed);
    let mut flows = vec![vec![0u64; cells]; cells];
    for w in path.windows(2) {
        flows[cell(w[0][0])][cell(w[1][0])] += 1;
    }
    let mut z2 = Vec::new();
    for a in 0..cells {
        for b in (a + 1)..cells {
            let (ab, ba) = (flows[a][b] as f64, flows[b][a] as f64);
            if ab + ba >= 400.0 {
                z2.push((ab - ba).powi(2) / (ab + ba));
            }
        }
    }
    assert!(z2.len() >= 30, "too few high-count pairs: {}", z2.len());
    let within = z2.iter().filter(|&&z| z <= 9.0).count() as f64 / z2.len() as f64;
    let mean_z2 = z2.iter().sum::<f64>() / z2.len() as f64;
    assert!(within >= 0.98, "only {within} of pairs within 3 std errors");
    assert!(
        (0.6..1.6).contains(&mean_z2),
        "mean squared z-score {mean_z2}"
    );
}

#[test]
fn mh_binned_flows_are_reversible() {
    assert_binned_flows_balance(SamplerParams::Mh { step: 0.6 }, 21);
}

#[test]
fn mala_binned_flows_are_reversible() {
    assert_binned_flows_balance(SamplerParams::Mala { step: 0.6 }, 22);
}

#[test]
fn mh_long_run_mean_is_consistent() {
    let target = standard_normal(1);
    let xs: Vec<f64> = run(
        SamplerParams::Mh { step: 2.4 },
        vec![0.5],
        &target,
        100_000,
        23,
    )
    .iter()
    .map(|p| p[0])
    .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let se = batch_means_se(&xs, 50);
    assert!(mean.abs() <= 4.0 * se, "mean {mean}, se {se}");
}

#[test]
fn nuts_recovers_standard_normal_moments() {
    for d in [1usize, 5] {
        let target = standard_normal(d);
        let mut rng = stream(24, "nuts-init", d as u64);
        let init: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let settings = NutsSettings::default();
        let draws = run(
            SamplerParams::Nuts(settings),
            init,
            &target,
            5000 + settings.warmup as usize,
            24 + d as u64,
        );
        let kept = &draws[settings.warmup as usize..];
        for k in 0..d {
            let xs: Vec<f64> = kept.iter().map(|p| p[k]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            let se = batch_means_se(&xs, 50);
            assert!(
                mean.abs() <= 4.0 * se,
                "d={d} coord {k}: mean {mean}, se {se}"
            );
            assert!(
                (0.8..=1.2).contains(&var),
                "d={d} coord {k}: variance {var}"
            );
        }
    }
}

#[test]
fn tempered_half_power_doubles_variance() {
    let target = temper(&standard_normal(1), 0.5, None).unwrap();
    let xs: Vec<f64> = run(
        SamplerParams::Mala { step: 1.5 },
        vec![0.0],
        &target,
        200_000,
        25,
    )
    .iter()
    .map(|p| p[0])
    .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    assert!((var - 2.0).abs() < 0.1, "variance {var}");
}
