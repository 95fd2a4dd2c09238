use std::f64::consts::PI;
use std::sync::Arc;

use ksd_mcmc::rng::stream;
use ksd_mcmc::targets::{
    GaussianMixture, GaussianMixtureSpec, LogDensity, MixtureComponent, Shifted,
};
use ksd_mcmc::weighting::{importance_weight_estimate, log_region_mass, GammaCache, DEFAULT_K_NN};

#[test]
fn importance_estimate_recovers_the_normalizer_on_the_whole_space() {
    let d = 3;
    let spec = GaussianMixtureSpec {
        components: vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.5; d],
            variance: 0.8,
        }],
    };
    let base = GaussianMixture::new(spec).unwrap();
    let points = base.sample_iid(5000, &mut stream(51, "points", 0));
    let log_c = 0.7;
    let model = Shifted {
        base: Arc::new(base),
        shift: log_c,
    };
    let est = importance_weight_estimate(
        &points,
        &model,
        |_| true,
        20_000,
        &mut stream(51, "proposal", 0),
    )
    .unwrap();
    assert_eq!(est.q_mass, 1.0);
    let expected = log_c + 0.5 * d as f64 * (2.0 * PI).ln();
    assert!(
        (est.log_mass - expected).abs() < 0.02,
        "{} vs {expected}",
        est.log_mass
    );
}

#[test]
fn importance_and_entropy_routes_agree_on_a_separated_mode() {
    let model = GaussianMixture::new(GaussianMixtureSpec::three_mode()).unwrap();
    let gamma = GammaCache::in_memory().get(2, DEFAULT_K_NN, 0.95).unwrap();
    let mut rng = stream(52, "mode", 0);
    let points: Vec<Vec<f64>> = model
        .sample_iid(20_000, &mut rng)
        .into_iter()
        .filter(|x| model.nearest_mode(x) == 1)
        .take(5000)
        .collect();
    assert_eq!(points.len(), 5000);
    let renyi = log_region_mass(&points, &model as &dyn LogDensity, 0.95, &gamma).unwrap();
    let imp = importance_weight_estimate(
        &points,
        &model,
        |x| model.nearest_mode(x) == 1,
        20_000,
        &mut rng,
    )
    .unwrap();
    assert!((0.0..=1.0).contains(&imp.q_mass));
    assert!(
        (renyi - imp.log_mass).abs() <= 0.1,
        "entropy route {renyi}, importance route {}",
        imp.log_mass
    );
}
