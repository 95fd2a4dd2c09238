use ksd_mcmc::baselines::{run_pt, run_smc, SmcInit, TemperatureLadder, DEFAULT_STEPS_PER_SWAP};
use ksd_mcmc::targets::{BoxRegion, GaussianMixture, GaussianMixtureSpec, MixtureComponent};

fn symmetric_pair() -> GaussianMixture {
    let c = |m: f64| MixtureComponent {
        weight: 1.0,
        mean: vec![m, 0.0],
        variance: 0.5,
    };
    GaussianMixture::new(GaussianMixtureSpec {
        components: vec![c(-3.0), c(3.0)],
    })
    .unwrap()
}

fn left_fraction(model: &GaussianMixture, points: &[Vec<f64>]) -> f64 {
    points.iter().filter(|p| model.nearest_mode(p) == 0).count() as f64 / points.len() as f64
}

#[test]
fn smc_splits_population_between_symmetric_modes() {
    let model = symmetric_pair();
    let target = model.clone().into_target();
    let out = run_smc(
        &target,
        &TemperatureLadder::exponential(),
        2000,
        0.5,
        SmcInit::Box(BoxRegion::cube(2, -6.0, 6.0)),
        31,
    )
    .unwrap();
    let frac = left_fraction(&model, out.sample.points());
    assert!((frac - 0.5).abs() <= 0.1, "left-mode fraction {frac}");
    assert!(out.ess.iter().all(|&e| (1.0..=2000.0 + 1e-9).contains(&e)));
    assert_eq!(out.evals, target.evals());
}

#[test]
fn pt_cold_chain_visits_both_modes_equally() {
    let model = symmetric_pair();
    let target = model.clone().into_target();
    let out = run_pt(
        &target,
        &TemperatureLadder::exponential(),
        0.5,
        DEFAULT_STEPS_PER_SWAP,
        40_000,
        &BoxRegion::cube(2, -6.0, 6.0),
        32,
    )
    .unwrap();
    let frac = left_fraction(&model, out.sample.points());
    assert!((frac - 0.5).abs() <= 0.1, "left-mode fraction {frac}");
    assert!(out.swap_accepts.iter().all(|&a| a > 0));
    assert!(out
        .swap_accepts
        .iter()
        .zip(&out.swap_attempts)
        .all(|(a, t)| a <= t));
}
