//! Metropolis-adjusted Langevin algorithm with identity preconditioning.
//!
//! Proposal `y = x + (ε²/2) s(x) + ε ξ`. The score at the current state is
//! cached, so each step costs one density and one gradient evaluation.

use super::{Batch, ChainHandle, SamplerParams};
use crate::error::{invalid, Error, Result};
use crate::targets::{BoxRegion, Target};

/// `log q(to | from)` up to the shared Gaussian constant.
fn log_proposal(to: &[f64], from: &[f64], score_from: &[f64], step: f64) -> f64 {
    let half = 0.5 * step * step;
    let ss: f64 = to
        .iter()
        .zip(from)
        .zip(score_from)
        .map(|((t, f), s)| {
            let r = t - f - half * s;
            r * r
        })
        .sum();
    -ss / (2.0 * step * step)
}

/// `log [p̂(y) q(x|y) / (p̂(x) q(y|x))]`.
pub fn mala_log_accept_ratio(
    x: &[f64],
    lp_x: f64,
    s_x: &[f64],
    y: &[f64],
    lp_y: f64,
    s_y: &[f64],
    step: f64,
) -> f64 {
    lp_y - lp_x + log_proposal(x, y, s_y, step) - log_proposal(y, x, s_x, step)
}

/// One MALA transition at inverse temperature `beta` (values and scores of
/// the base target are scaled by `beta`). Proposals outside `support` are
/// rejected without evaluation. Returns whether the move was accepted.
pub(crate) fn mala_step(
    chain: &mut ChainHandle,
    target: &Target,
    step: f64,
    beta: f64,
    support: Option<&BoxRegion>,
) -> bool {
    let d = chain.position.len();
    let noise = chain.gaussian_vec(d);
    let u = chain.uniform();
    chain.proposed += 1;
    let drift_ok = chain.grad.iter().all(|g| g.is_finite());
    let half = 0.5 * step * step;
    let y: Vec<f64> = if drift_ok {
        (0..d)
            .map(|i| chain.position[i] + half * beta * chain.grad[i] + step * noise[i])
            .collect()
    } else {
        chain.flagged += 1;
        (0..d)
            .map(|i| chain.position[i] + step * noise[i])
            .collect()
    };
    if support.is_some_and(|b| !b.contains(&y)) {
        return false;
    }
    let (lp_y, g_y) = chain.eval_with_grad(target, &y);
    if lp_y == f64::NEG_INFINITY || lp_y.is_nan() {
        return false;
    }
    let cur_lp = beta * chain.log_density;
    let tempered_lp_y = beta * lp_y;
    let log_ratio = if drift_ok {
        if g_y.iter().any(|g| !g.is_finite()) {
            return false;
        }
        let sx: Vec<f64> = chain.grad.iter().map(|g| beta * g).collect();
        let sy: Vec<f64> = g_y.iter().map(|g| beta * g).collect();
        mala_log_accept_ratio(&chain.position, cur_lp, &sx, &y, tempered_lp_y, &sy, step)
    } else {
        tempered_lp_y - cur_lp
    };
    if u.ln() < log_ratio {
        chain.position = y;
        chain.log_density = lp_y;
        chain.grad = g_y;
        chain.accepted += 1;
        true
    } else {
        false
    }
}

pub fn mala_batch(chain: &mut ChainHandle, target: &Target, n_b: usize) -> Result<Batch> {
    let step = match chain.params {
        SamplerParams::Mala { step } => step,
        _ => return Err(invalid("mala_batch called on a non-MALA chain")),
    };
    if !chain.log_density.is_finite() {
        return Err(Error::NonFinite {
            what: "log-density",
            point: chain.position.clone(),
        });
    }
    let before = chain.evals();
    let mut points = Vec::with_capacity(n_b);
    let mut scores = Vec::with_capacity(n_b);
    for _ in 0..n_b {
        mala_step(chain, target, step, 1.0, None);
        points.push(chain.position.clone());
        scores.push(chain.grad.clone());
    }
    let scores = if scores.iter().flatten().all(|g| g.is_finite()) {
        Some(scores)
    } else {
        None
    };
    Ok(chain.finish_batch(points, scores, before))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::samplers::mh_batch;
    use crate::targets::{
        standard_normal, BoxRegion, GaussianMixture, GaussianMixtureSpec, UniformBox,
    };
    use rand::Rng;
    use std::sync::Arc;

    #[test]
    fn zero_drift_reduces_to_mh() {
        let t = Target::new(
            Arc::new(UniformBox {
                region: BoxRegion::cube(2, -1.0, 1.0),
            }),
            None,
        );
        let mut mala = ChainHandle::new(
            0,
            SamplerParams::Mala { step: 0.4 },
            vec![0.0, 0.0],
            stream(5, "c", 0),
            &t,
        )
        .unwrap();
        let mut mh = ChainHandle::new(
            0,
            SamplerParams::Mh { step: 0.4 },
            vec![0.0, 0.0],
            stream(5, "c", 0),
            &t,
        )
        .unwrap();
        let a = mala_batch(&mut mala, &t, 500).unwrap();
        let b = mh_batch(&mut mh, &t, 500).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(mala.accepted, mh.accepted);
        assert!(mala.accepted < 500, "box edge should reject something");
    }

    #[test]
    fn drift_vanishes_at_the_mode() {
        let t = standard_normal(2);
        let c = ChainHandle::new(
            0,
            SamplerParams::Mala { step: 1.0 },
            vec![0.0, 0.0],
            stream(6, "c", 0),
            &t,
        )
        .unwrap();
        assert_eq!(c.grad, vec![0.0, 0.0]);
    }

    /// Brute-force recomputation with fully normalized Gaussian densities.
    fn oracle_ratio(m: &GaussianMixture, x: &[f64], y: &[f64], step: f64) -> f64 {
        use crate::targets::LogDensity;
        let p = |z: &[f64]| m.log_density(z).exp();
        let s = |z: &[f64]| {
            let mut g = vec![0.0; z.len()];
            m.log_density_and_grad(z, &mut g);
            g
        };
        let q = |to: &[f64], from: &[f64]| {
            let sf = s(from);
            let mut r2 = 0.0;
            for i in 0..to.len() {
                let mean = from[i] + 0.5 * step * step * sf[i];
                r2 += (to[i] - mean).powi(2);
            }
            let var = step * step;
            (-(r2) / (2.0 * var)).exp()
                / (2.0 * std::f64::consts::PI * var).powf(to.len() as f64 / 2.0)
        };
        (p(y) * q(x, y) / (p(x) * q(y, x))).ln()
    }

    #[test]
    fn acceptance_ratio_matches_brute_force() {
        use crate::targets::LogDensity;
        let m = GaussianMixture::new(GaussianMixtureSpec::three_mode()).unwrap();
        let mut rng = stream(7, "oracle", 0);
        for _ in 0..1000 {
            let x = [rng.random_range(-3.0..9.0), rng.random_range(-3.0..9.0)];
            let y = [
                x[0] + rng.random_range(-1.0..1.0),
                x[1] + rng.random_range(-1.0..1.0),
            ];
            let step = rng.random_range(0.1..1.5);
            let (mut sx, mut sy) = (vec![0.0; 2], vec![0.0; 2]);
            let lx = m.log_density_and_grad(&x, &mut sx);
            let ly = m.log_density_and_grad(&y, &mut sy);
            let got = mala_log_accept_ratio(&x, lx, &sx, &y, ly, &sy, step);
            let want = oracle_ratio(&m, &x, &y, step);
            if want.is_finite() {
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                    "{got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn one_density_and_one_gradient_per_step() {
        let t = standard_normal(2);
        let mut c = ChainHandle::new(
            0,
            SamplerParams::Mala { step: 0.8 },
            vec![0.1, 0.2],
            stream(8, "c", 0),
            &t,
        )
        .unwrap();
        let before = t.evals();
        let b = mala_batch(&mut c, &t, 50).unwrap();
        let spent = t.evals() - before;
        assert_eq!((spent.density, spent.gradient), (50, 50));
        assert_eq!(b.scores.as_ref().unwrap().len(), 50);
    }
}
