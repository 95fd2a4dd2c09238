//! Random-walk Metropolis–Hastings with an isotropic Gaussian proposal.

use super::{Batch, ChainHandle, SamplerParams};
use crate::error::{invalid, Error, Result};
use crate::targets::Target;

/// `n_b` MH steps; every post-decision state is recorded. One density
/// evaluation per step.
pub fn mh_batch(chain: &mut ChainHandle, target: &Target, n_b: usize) -> Result<Batch> {
    let step = match chain.params {
        SamplerParams::Mh { step } => step,
        _ => return Err(invalid("mh_batch called on a non-MH chain")),
    };
    if !chain.log_density.is_finite() {
        return Err(Error::NonFinite {
            what: "log-density",
            point: chain.position.clone(),
        });
    }
    let before = chain.evals();
    let d = chain.position.len();
    let mut points = Vec::with_capacity(n_b);
    for _ in 0..n_b {
        let noise = chain.gaussian_vec(d);
        let u = chain.uniform();
        let y: Vec<f64> = chain
            .position
            .iter()
            .zip(&noise)
            .map(|(x, z)| x + step * z)
            .collect();
        let lp_y = chain.eval(target, &y);
        chain.proposed += 1;
        if u.ln() < lp_y - chain.log_density {
            chain.position = y;
            chain.log_density = lp_y;
            chain.accepted += 1;
        }
        points.push(chain.position.clone());
    }
    Ok(chain.finish_batch(points, None, before))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::targets::{standard_normal, BoxRegion, UniformBox};
    use std::sync::Arc;

    #[test]
    fn tiny_steps_barely_move() {
        let t = standard_normal(2);
        let mut c = ChainHandle::new(
            0,
            SamplerParams::Mh { step: 1e-12 },
            vec![0.5, -0.5],
            stream(1, "c", 0),
            &t,
        )
        .unwrap();
        let b = mh_batch(&mut c, &t, 100).unwrap();
        assert_eq!(c.accepted, 100);
        for p in &b.points {
            assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] + 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_interior_always_accepts() {
        let t = Target::new(
            Arc::new(UniformBox {
                region: BoxRegion::cube(2, -1e6, 1e6),
            }),
            None,
        );
        let mut c = ChainHandle::new(
            0,
            SamplerParams::Mh { step: 0.5 },
            vec![0.0, 0.0],
            stream(2, "c", 0),
            &t,
        )
        .unwrap();
        mh_batch(&mut c, &t, 1000).unwrap();
        assert_eq!(c.accepted, c.proposed);
    }

    #[test]
    fn one_density_per_step() {
        let t = standard_normal(3);
        let mut c = ChainHandle::new(
            0,
            SamplerParams::Mh { step: 1.0 },
            vec![0.0; 3],
            stream(3, "c", 0),
            &t,
        )
        .unwrap();
        let before = t.evals();
        let b = mh_batch(&mut c, &t, 37).unwrap();
        let spent = t.evals() - before;
        assert_eq!(spent.density, 37);
        assert_eq!(spent.gradient, 0);
        assert_eq!(b.evals, spent);
        assert_eq!(c.evals().density, 38);
        assert_eq!(c.history().len(), 37);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let t = standard_normal(1);
        let mut c = ChainHandle::new(
            0,
            SamplerParams::Mala { step: 1.0 },
            vec![0.0],
            stream(4, "c", 0),
            &t,
        )
        .unwrap();
        assert!(mh_batch(&mut c, &t, 1).is_err());
    }
}
