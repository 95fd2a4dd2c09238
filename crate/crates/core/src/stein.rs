//! Kernel Stein discrepancy with the inverse multiquadric base kernel.
//!
//! The base kernel is `k(x, y) = (c² + ‖x - y‖²/h)^γ` with `γ ∈ (-1, 0)`.
//! Applying the Langevin Stein operator in both arguments gives
//!
//! ```text
//! k_p(x, y) = s(x)ᵀ s(y) k + s(x)ᵀ ∇_y k + s(y)ᵀ ∇_x k + tr(∇_x ∇_y k)
//! ```
//!
//! with `s = ∇ log p̂`. The discrepancy of a weighted sample is
//! `sqrt(qᵀ K_p q)`. Only the score enters, so the normalization constant of
//! the target never matters.
//!
//! For `u = x - y` and `s = c² + ‖u‖²/h`:
//!
//! ```text
//! ∇_x k           = 2γ s^{γ-1} u / h  = -∇_y k
//! tr(∇_x ∇_y k)   = -4γ(γ-1) s^{γ-2} ‖u‖²/h² - 2dγ s^{γ-1}/h
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::targets::LogDensity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Bandwidth divisor `h > 0`.
    pub h: f64,
    /// Exponent `γ ∈ (-1, 0)`.
    pub gamma_exp: f64,
    /// Additive constant `c² > 0`.
    #[serde(default = "one")]
    pub c2: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            h: 1.0,
            gamma_exp: -0.5,
            c2: 1.0,
        }
    }
}

impl KernelConfig {
    pub fn with_h(h: f64) -> Self {
        Self {
            h,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!(
                "kernel bandwidth h must be positive, got {}",
                self.h
            )));
        }
        if !(self.gamma_exp > -1.0 && self.gamma_exp < 0.0) {
            return Err(invalid(format!(
                "kernel exponent must lie in (-1, 0), got {}",
                self.gamma_exp
            )));
        }
        if !(self.c2 > 0.0) {
            return Err(invalid("kernel constant c2 must be positive"));
        }
        Ok(())
    }
}

/// IMQ kernel value and derivatives at one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ImqEval {
    pub k: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// `tr(∇_x ∇_y k)`
    pub trace: f64,
}

pub fn imq_kernel(x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<ImqEval> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let (k, gscale, trace) = imq_scalars(x, y, cfg);
    let grad_x: Vec<f64> = x.iter().zip(y).map(|(a, b)| gscale * (a - b)).collect();
    let grad_y = grad_x.iter().map(|g| -g).collect();
    Ok(ImqEval {
        k,
        grad_x,
        grad_y,
        trace,
    })
}

/// `(k, c, tr)` with `∇_x k = c·(x - y)`.
#[inline]
fn imq_scalars(x: &[f64], y: &[f64], cfg: &KernelConfig) -> (f64, f64, f64) {
    let d = x.len() as f64;
    let r2 = crate::sample::sq_dist(x, y);
    let s = cfg.c2 + r2 / cfg.h;
    let g = cfg.gamma_exp;
    let s_gm1 = s.powf(g - 1.0);
    let k = s_gm1 * s;
    let gscale = 2.0 * g * s_gm1 / cfg.h;
    let trace =
        -4.0 * g * (g - 1.0) * s_gm1 / s * r2 / (cfg.h * cfg.h) - 2.0 * d * g * s_gm1 / cfg.h;
    (k, gscale, trace)
}

/// `k_p(x, y)` from precomputed scores.
#[inline]
pub fn stein_kernel_with_scores(
    x: &[f64],
    sx: &[f64],
    y: &[f64],
    sy: &[f64],
    cfg: &KernelConfig,
) -> f64 {
    let (k, c, trace) = imq_scalars(x, y, cfg);
    let mut ss = 0.0;
    let mut cross = 0.0;
    for i in 0..x.len() {
        let u = x[i] - y[i];
        ss += sx[i] * sy[i];
        // s(x)ᵀ∇_y k + s(y)ᵀ∇_x k = c·uᵀ(s(y) - s(x))
        cross += u * (sy[i] - sx[i]);
    }
    ss * k + c * cross + trace
}

fn score(model: &dyn LogDensity, x: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let lp = model.log_density_and_grad(x, &mut g);
    if !lp.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "score",
            point: x.to_vec(),
        });
    }
    Ok(g)
}

/// Scores of all points, computed once each.
pub fn scores(model: &dyn LogDensity, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    points.iter().map(|p| score(model, p)).collect()
}

pub fn stein_kernel(
    model: &dyn LogDensity,
    x: &[f64],
    y: &[f64],
    cfg: &KernelConfig,
) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let sx = score(model, x)?;
    let sy = score(model, y)?;
    Ok(stein_kernel_with_scores(x, &sx, y, &sy, cfg))
}

const NEGATIVE_TOL: f64 = 1e-9;

/// `sqrt(qᵀ K_p q)` over the upper triangle. Row sums are reduced in index
/// order, so the result does not depend on the thread schedule.
pub fn ksd_with_scores(
    points: &[Vec<f64>],
    scores: &[Vec<f64>],
    weights: &[f64],
    cfg: &KernelConfig,
) -> Result<f64> {
    let n = points.len();
    if n == 0 || scores.len() != n || weights.len() != n {
        return Err(invalid(
            "points, scores and weights must be nonempty and of equal length",
        ));
    }
    let row = |i: usize| {
        let (xi, si, qi) = (&points[i], &scores[i], weights[i]);
        let mut sum = qi * qi * stein_kernel_with_scores(xi, si, xi, si, cfg);
        let mut abs = sum.abs();
        for j in (i + 1)..n {
            let v = 2.0
                * qi
                * weights[j]
                * stein_kernel_with_scores(xi, si, &points[j], &scores[j], cfg);
            sum += v;
            abs += v.abs();
        }
        (sum, abs)
    };
    let rows: Vec<(f64, f64)> = if n >= 256 {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    let quad = crate::sample::compensated_sum(rows.iter().map(|r| r.0));
    let scale: f64 = rows.iter().map(|r| r.1).sum();
    if quad < 0.0 {
        if -quad > NEGATIVE_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NegativeQuadraticForm { value: quad, scale });
        }
        return Ok(0.0);
    }
    Ok(quad.sqrt())
}

/// KSD of a weighted sample.
pub fn ksd(
    sample: &crate::WeightedSample,
    model: &dyn LogDensity,
    cfg: &KernelConfig,
) -> Result<f64> {
    cfg.validate()?;
    let s = scores(model, sample.points())?;
    ksd_with_scores(sample.points(), &s, sample.weights(), cfg)
}

/// KSD of an equally weighted block.
pub fn block_ksd(points: &[Vec<f64>], model: &dyn LogDensity, cfg: &KernelConfig) -> Result<f64> {
    let s = scores(model, points)?;
    block_ksd_with_scores(points, &s, cfg)
}

pub fn block_ksd_with_scores(
    points: &[Vec<f64>],
    scores: &[Vec<f64>],
    cfg: &KernelConfig,
) -> Result<f64> {
    let n = points.len();
    ksd_with_scores(points, scores, &vec![1.0 / n as f64; n], cfg)
}

/// Mean of the block KSDs over consecutive blocks of `block_size`; a
/// trailing partial block is ignored.
pub fn average_block_ksd(
    points: &[Vec<f64>],
    scores: &[Vec<f64>],
    block_size: usize,
    cfg: &KernelConfig,
) -> Result<f64> {
    if block_size == 0 || points.len() < block_size {
        return Err(Error::NotEnoughPoints {
            needed: block_size.max(1),
            got: points.len(),
        });
    }
    let blocks = points.len() / block_size;
    let vals: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let r = b * block_size..(b + 1) * block_size;
            block_ksd_with_scores(&points[r.clone()], &scores[r], cfg)
        })
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / blocks as f64)
}

/// One observed block discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockKsdRecord {
    pub sampler_id: usize,
    pub block_index: usize,
    pub value: f64,
    pub block_size: usize,
}
