//! Region probability estimates from samples.
//!
//! For samples `X^A` from `p(·|A)` the log-mass
//! `β(X^A) = R̂_α − log(B̂_α)/(1−α)` estimates `log(c·P(A))`, where `R̂_α`
//! is the kNN-graph Rényi entropy estimate, `B̂_α` the sample mean of
//! `p̂^{α−1}` and `c` the unknown normalizing constant. The constant `c`
//! cancels in the softmax of [`region_weights`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::knn::KdTree;
use crate::rng::stream;
use crate::sample::{log_sum_exp, sq_dist};
use crate::targets::LogDensity;

/// Default neighbour count of the entropy graph.
pub const DEFAULT_K_NN: usize = 3;

const JITTER: f64 = 1e-9;

/// Calibrated limit of `L_{p,k}/n^{1−p/d}` for uniform points in the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConstant {
    pub d: usize,
    pub k_nn: usize,
    pub alpha: f64,
    pub p_exponent: f64,
    pub value: f64,
    pub std_err: f64,
    pub n: usize,
    pub repeats: usize,
}

impl GammaConstant {
    /// Whether `p < d − 1`, the regime where the estimator is known to be consistent.
    pub fn in_consistent_regime(&self) -> bool {
        self.p_exponent < self.d as f64 - 1.0
    }
}

/// Size of the Monte Carlo calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub n: usize,
    pub repeats: usize,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            n: 10_000,
            repeats: 20,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "Rényi order must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Monte Carlo estimate of γ over `cal.repeats` unit-cube samples of size `cal.n`.
pub fn calibrate_gamma(
    d: usize,
    k_nn: usize,
    alpha: f64,
    cal: Calibration,
    seed: u64,
) -> Result<GammaConstant> {
    check_alpha(alpha)?;
    if d == 0 || k_nn == 0 || cal.repeats == 0 || cal.n <= k_nn {
        return Err(invalid("calibration needs d, k ≥ 1, repeats ≥ 1 and n > k"));
    }
    let p = d as f64 * (1.0 - alpha);
    let norm = (cal.n as f64).powf(1.0 - p / d as f64);
    let mut values = Vec::with_capacity(cal.repeats);
    for r in 0..cal.repeats {
        let mut rng = stream(seed, "gamma-calibration", r as u64);
        let pts: Vec<Vec<f64>> = (0..cal.n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect();
        values.push(knn_graph_length(&pts, k_nn, p)? / norm);
    }
    let m = cal.repeats as f64;
    let mean = values.iter().sum::<f64>() / m;
    let std_err = if cal.repeats > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        0.0
    };
    Ok(GammaConstant {
        d,
        k_nn,
        alpha,
        p_exponent: p,
        value: mean,
        std_err,
        n: cal.n,
        repeats: cal.repeats,
    })
}

/// Seed used for a given `(d, k, α)`, so a cached and a fresh calibration agree.
pub fn calibration_seed(d: usize, k_nn: usize, alpha: f64) -> u64 {
    crate::rng::child_seed(
        alpha.to_bits() ^ ((d as u64) << 48) ^ ((k_nn as u64) << 32),
        "gamma",
        0,
    )
}

fn cache_key(d: usize, k_nn: usize, alpha: f64) -> String {
    format!("d={d};k={k_nn};alpha={alpha}")
}

/// γ constants keyed by `(d, k, α)`, optionally persisted as JSON.
pub struct GammaCache {
    path: Option<PathBuf>,
    calibration: Calibration,
    entries: Mutex<BTreeMap<String, GammaConstant>>,
}

impl GammaCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            calibration: Calibration::default(),
            entries: Mutex::new(BTreeMap::new()),
        }
    }

    /// Loads `path` if it exists; new calibrations are written back to it.
    pub fn at_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let entries = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::Cache(format!("{}: {e}", path.display()))),
        };
        Ok(Self {
            path: Some(path),
            calibration: Calibration::default(),
            entries: Mutex::new(entries),
        })
    }

    pub fn with_calibration(mut self, calibration: Calibration) -> Self {
        self.calibration = calibration;
        self
    }

    pub fn get(&self, d: usize, k_nn: usize, alpha: f64) -> Result<GammaConstant> {
        let key = cache_key(d, k_nn, alpha);
        let mut entries = self.entries.lock().expect("gamma cache poisoned");
        if let Some(g) = entries.get(&key) {
            if g.n == self.calibration.n && g.repeats == self.calibration.repeats {
                return Ok(*g);
            }
        }
        let g = calibrate_gamma(
            d,
            k_nn,
            alpha,
            self.calibration,
            calibration_seed(d, k_nn, alpha),
        )?;
        entries.insert(key, g);
        if let Some(path) = &self.path {
            let text =
                serde_json::to_string_pretty(&*entries).map_err(|e| Error::Cache(e.to_string()))?;
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, text)
                .and_then(|_| std::fs::rename(&tmp, path))
                .map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        }
        Ok(g)
    }
}

/// Copies of `points` with exact duplicates moved apart by a tiny deterministic jitter.
fn separate_duplicates(points: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let lex = |a: &Vec<f64>, b: &Vec<f64>| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    order.sort_by(|&i, &j| lex(&points[i], &points[j]).then(i.cmp(&j)));
    let dups: Vec<usize> = order
        .windows(2)
        .filter(|w| points[w[0]] == points[w[1]])
        .map(|w| w[1])
        .collect();
    if dups.is_empty() {
        return None;
    }
    let mut out = points.to_vec();
    for i in dups {
        let mut rng = stream(0, "duplicate-jitter", i as u64);
        for x in out[i].iter_mut() {
            *x += JITTER * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Some(out)
}

/// `L_{p,k}`: sum over the directed kNN edges of `‖x − x'‖^p`.
pub fn knn_graph_length(points: &[Vec<f64>], k_nn: usize, p: f64) -> Result<f64> {
    if points.len() < k_nn + 1 {
        return Err(Error::NotEnoughPoints {
            needed: k_nn + 1,
            got: points.len(),
        });
    }
    let jittered = separate_duplicates(points);
    let pts = jittered.as_deref().unwrap_or(points);
    let tree = KdTree::build(pts);
    let per_point: Vec<f64> = tree
        .all_nearest(k_nn)
        .iter()
        .map(|nbrs| nbrs.iter().map(|n| n.sq_dist.powf(p / 2.0)).sum())
        .collect();
    Ok(per_point.iter().sum())
}

/// kNN-graph estimate of the order-α Rényi entropy.
pub fn renyi_entropy_estimate(
    points: &[Vec<f64>],
    alpha: f64,
    gamma: &GammaConstant,
) -> Result<f64> {
    check_alpha(alpha)?;
    let d = points.first().map_or(0, Vec::len);
    if d != gamma.d || alpha != gamma.alpha {
        return Err(invalid(format!(
            "γ calibrated for d={}, α={} but used with d={d}, α={alpha}",
            gamma.d, gamma.alpha
        )));
    }
    let n = points.len() as f64;
    let p = gamma.p_exponent;
    let length = knn_graph_length(points, gamma.k_nn, p)?;
    if length <= 0.0 {
        return Err(Error::Degenerate("kNN graph has zero length".into()));
    }
    Ok((length / (gamma.value * n.powf(1.0 - p / d as f64))).ln() / (1.0 - alpha))
}

/// `log B̂_α = logsumexp((α−1) log p̂(x_i)) − log m`.
pub fn log_moment_term(log_densities: &[f64], alpha: f64) -> Result<f64> {
    if let Some(bad) = log_densities.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "log density",
            point: vec![*bad],
        });
    }
    let scaled: Vec<f64> = log_densities.iter().map(|l| (alpha - 1.0) * l).collect();
    Ok(log_sum_exp(&scaled) - (log_densities.len() as f64).ln())
}

/// `β(X^A)`, an estimate of `log(c·P(A))` from points distributed as `p(·|A)`.
pub fn log_region_mass(
    points: &[Vec<f64>],
    model: &dyn LogDensity,
    alpha: f64,
    gamma: &GammaConstant,
) -> Result<f64> {
    let log_p: Vec<f64> = points.iter().map(|x| model.log_density(x)).collect();
    if let Some(i) = log_p.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "log density",
            point: points[i].clone(),
        });
    }
    log_region_mass_with(points, &log_p, alpha, gamma)
}

/// As [`log_region_mass`] with precomputed `log p̂` values.
///
/// Repeated states (rejections in MCMC output) are counted once: a zero
/// nearest-neighbour distance would otherwise drag the graph length down,
/// and with α near 1 the `1/(1−α)` factor turns that into a large error.
pub fn log_region_mass_with(
    points: &[Vec<f64>],
    log_p: &[f64],
    alpha: f64,
    gamma: &GammaConstant,
) -> Result<f64> {
    let keep = distinct_indices(points);
    let (pts, lp): (Vec<Vec<f64>>, Vec<f64>) = if keep.len() == points.len() {
        (points.to_vec(), log_p.to_vec())
    } else {
        keep.iter().map(|&i| (points[i].clone(), log_p[i])).unzip()
    };
    let r = renyi_entropy_estimate(&pts, alpha, gamma)?;
    Ok(r - log_moment_term(&lp, alpha)? / (1.0 - alpha))
}

/// Indices of the first occurrence of each distinct point, in order.
pub fn distinct_indices(points: &[Vec<f64>]) -> Vec<usize> {
    let mut seen = std::collections::HashSet::with_capacity(points.len());
    (0..points.len())
        .filter(|&i| seen.insert(points[i].iter().map(|v| v.to_bits()).collect::<Vec<u64>>()))
        .collect()
}

/// Log-masses and their softmax.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionWeights {
    pub betas: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn region_weights(betas: &[f64]) -> Result<RegionWeights> {
    if betas.is_empty() {
        return Err(invalid("need at least one region"));
    }
    if betas.iter().any(|b| b.is_nan() || *b == f64::INFINITY) {
        return Err(invalid("log-masses must not be NaN or +inf"));
    }
    let lse = log_sum_exp(betas);
    if lse == f64::NEG_INFINITY {
        return Err(Error::Degenerate(
            "every region has zero estimated mass".into(),
        ));
    }
    let weights = betas.iter().map(|b| (b - lse).exp()).collect();
    Ok(RegionWeights {
        betas: betas.to_vec(),
        weights,
    })
}

/// A Gaussian fitted to a point set by its empirical mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
    log_det: f64,
}

pub fn mean_and_cov(points: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = points[0].len();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / n;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for p in points {
        for a in 0..d {
            let da = p[a] - mean[a];
            for b in 0..=a {
                cov[a][b] += da * (p[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1.0).max(1.0);
    for a in 0..d {
        for b in 0..=a {
            cov[a][b] /= denom;
            cov[b][a] = cov[a][b];
        }
    }
    (mean, cov)
}

/// `sqrt(trace(cov))`, the spread of a point set.
pub fn spread(points: &[Vec<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let d = points[0].len();
    let mut m = vec![0.0; d];
    for p in points {
        for (mi, x) in m.iter_mut().zip(p) {
            *mi += x / n;
        }
    }
    let ss: f64 = points.iter().map(|p| sq_dist(p, &m)).sum();
    (ss / (n - 1.0)).sqrt()
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = a[i][i] - s;
                if !(v > 0.0) || !v.is_finite() {
                    return None;
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

impl GaussianFit {
    /// Fits mean and covariance; adds `1e−6·I` if the covariance is singular.
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::NotEnoughPoints {
                needed: 2,
                got: points.len(),
            });
        }
        let (mean, mut cov) = mean_and_cov(points);
        let chol = match cholesky(&cov) {
            Some(l) => l,
            None => {
                for (i, row) in cov.iter_mut().enumerate() {
                    row[i] += 1e-6;
                }
                cholesky(&cov)
                    .ok_or_else(|| Error::Degenerate("covariance not positive definite".into()))?
            }
        };
        let log_det = 2.0 * (0..mean.len()).map(|i| chol[i][i].ln()).sum::<f64>();
        Ok(Self {
            mean,
            cov,
            chol,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        // forward substitution for L z = x − μ
        let mut z = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|k| self.chol[i][k] * z[k]).sum();
            z[i] = (x[i] - self.mean[i] - s) / self.chol[i][i];
        }
        let q: f64 = z.iter().map(|v| v * v).sum();
        -0.5 * (q + self.log_det + d as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    /// Log normalizing mass of the Gaussian matching `p̂` at the fitted mean.
    pub fn log_mass_at_mean(&self, model: &dyn LogDensity) -> f64 {
        model.log_density(&self.mean) - self.log_pdf(&self.mean)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|k| self.chol[i][k] * z[k]).sum::<f64>())
            .collect()
    }
}

/// Gaussian-approximation log-mass: `log p̂(μ̂) − log N(μ̂; μ̂, Σ̂)`.
pub fn gaussian_log_mass(points: &[Vec<f64>], model: &dyn LogDensity) -> Result<f64> {
    Ok(GaussianFit::fit(points)?.log_mass_at_mean(model))
}

/// Importance-weighting estimate of `log(c·P(A))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceEstimate {
    pub log_mass: f64,
    /// Fraction of fresh proposal draws that landed in `A`.
    pub q_mass: f64,
}

/// Fits a Gaussian `Q` to the points, estimates `Q(A)` by the hit rate of
/// `n_draws` fresh draws and `E_Q[p̂/q | A]` from `n_draws` draws of `Q`
/// restricted to `A` (by rejection).
pub fn importance_weight_estimate(
    points: &[Vec<f64>],
    model: &dyn LogDensity,
    in_region: impl Fn(&[f64]) -> bool,
    n_draws: usize,
    rng: &mut impl Rng,
) -> Result<ImportanceEstimate> {
    if n_draws == 0 {
        return Err(invalid("need at least one proposal draw"));
    }
    let q = GaussianFit::fit(points)?;
    let hits = (0..n_draws).filter(|_| in_region(&q.sample(rng))).count();
    let q_mass = hits as f64 / n_draws as f64;
    if hits == 0 {
        return Err(Error::Degenerate(
            "no proposal draw landed in the region".into(),
        ));
    }
    let max_attempts = n_draws.saturating_mul(1000);
    let mut log_ratios = Vec::with_capacity(n_draws);
    let mut attempts = 0;
    while log_ratios.len() < n_draws {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Degenerate(
                "region too unlikely under the fitted proposal".into(),
            ));
        }
        let y = q.sample(rng);
        if in_region(&y) {
            log_ratios.push(model.log_density(&y) - q.log_pdf(&y));
        }
    }
    let log_mean = log_sum_exp(&log_ratios) - (n_draws as f64).ln();
    Ok(ImportanceEstimate {
        log_mass: q_mass.ln() + log_mean,
        q_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::knn_brute;
    use crate::targets::{standard_normal, GaussianMixture, GaussianMixtureSpec, MixtureComponent};

    fn quick() -> Calibration {
        Calibration {
            n: 2000,
            repeats: 5,
        }
    }

    fn uniform_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream(seed, "u", 0);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect()
    }

    #[test]
    fn zero_exponent_counts_edges() {
        let pts = uniform_points(500, 2, 1);
        assert_eq!(knn_graph_length(&pts, 3, 0.0).unwrap(), 1500.0);
        assert!(calibrate_gamma(2, 3, 1.0, quick(), 1).is_err());
    }

    #[test]
    fn collinear_hand_example() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert_eq!(knn_graph_length(&pts, 1, 1.0).unwrap(), 3.0);
        assert!(knn_graph_length(&pts[..1], 1, 1.0).is_err());
    }

    #[test]
    fn homogeneity_and_brute_force_agreement() {
        let pts = uniform_points(300, 3, 2);
        let p = 0.3;
        let l = knn_graph_length(&pts, 3, p).unwrap();
        let brute: f64 = knn_brute(&pts, 3)
            .iter()
            .map(|nb| nb.iter().map(|n| n.sq_dist.powf(p / 2.0)).sum::<f64>())
            .sum();
        assert_eq!(l, brute);
        let scaled: Vec<Vec<f64>> = pts
            .iter()
            .map(|x| x.iter().map(|v| v * 4.0).collect())
            .collect();
        let ls = knn_graph_length(&scaled, 3, p).unwrap();
        assert!((ls - 4f64.powf(p) * l).abs() < 1e-12 * ls);
    }

    #[test]
    fn duplicates_are_separated() {
        let mut pts = uniform_points(50, 2, 3);
        pts.push(pts[0].clone());
        pts.push(pts[0].clone());
        let l = knn_graph_length(&pts, 3, 0.1).unwrap();
        assert!(l.is_finite() && l > 0.0);
        assert!(renyi_entropy_estimate(
            &vec![vec![0.5, 0.5]; 10],
            0.9,
            &calibrate_gamma(2, 3, 0.9, quick(), 1).unwrap()
        )
        .is_ok());
    }

    #[test]
    fn gamma_is_positive() {
        let g = calibrate_gamma(2, 3, 0.9, quick(), 4).unwrap();
        assert!(g.value > 0.0 && g.std_err > 0.0);
        assert!(g.in_consistent_regime());
    }

    #[test]
    fn gamma_calibrations_agree() {
        let a = calibrate_gamma(2, 3, 0.95, quick(), 5).unwrap();
        let b = calibrate_gamma(2, 3, 0.95, quick(), 6).unwrap();
        let se = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        assert!((a.value - b.value).abs() < 3.0 * se + 1e-12);
    }

    #[test]
    fn cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("gamma-cache-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("gamma.json");
        let _ = std::fs::remove_file(&path);
        let first = GammaCache::at_path(&path)
            .unwrap()
            .with_calibration(quick())
            .get(2, 3, 0.9)
            .unwrap();
        assert!(path.exists());
        let second = GammaCache::at_path(&path)
            .unwrap()
            .with_calibration(quick())
            .get(2, 3, 0.9)
            .unwrap();
        assert_eq!(first, second);
        let fresh = GammaCache::in_memory()
            .with_calibration(quick())
            .get(2, 3, 0.9)
            .unwrap();
        assert_eq!(first, fresh);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn translation_invariance_is_exact_for_lengths() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![0.25, 2.0],
            vec![3.0, 1.0],
            vec![2.0, 2.0],
        ];
        let shifted: Vec<Vec<f64>> = pts.iter().map(|x| vec![x[0] + 8.0, x[1] - 16.0]).collect();
        assert_eq!(
            knn_graph_length(&pts, 2, 0.2).unwrap(),
            knn_graph_length(&shifted, 2, 0.2).unwrap()
        );
    }

    #[test]
    fn softmax_weights() {
        let w = region_weights(&[2f64.ln(), 0.0]).unwrap();
        assert!((w.weights[0] - 2.0 / 3.0).abs() < 1e-15);
        let w = region_weights(&[-700.0; 4]).unwrap();
        assert!(w.weights.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_density_has_no_moment_term() {
        assert_eq!(log_moment_term(&[0.0; 10], 0.9).unwrap(), 0.0);
        assert!(log_moment_term(&[0.0, f64::NEG_INFINITY], 0.9).is_err());
    }

    #[test]
    fn scaling_density_shifts_log_mass() {
        let g = calibrate_gamma(2, 3, 0.95, quick(), 7).unwrap();
        let target = standard_normal(2);
        let mut rng = stream(8, "n", 0);
        let pts: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..2).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let lp: Vec<f64> = pts.iter().map(|x| target.model().log_density(x)).collect();
        let shifted: Vec<f64> = lp.iter().map(|v| v + 3.0).collect();
        let a = log_region_mass_with(&pts, &lp, 0.95, &g).unwrap();
        let b = log_region_mass_with(&pts, &shifted, 0.95, &g).unwrap();
        assert!((b - a - 3.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_fit_density_and_mass() {
        let spec = GaussianMixtureSpec {
            components: vec![MixtureComponent {
                weight: 1.0,
                mean: vec![1.0, -2.0],
                variance: 0.5,
            }],
        };
        let mix = GaussianMixture::new(spec).unwrap();
        let mut rng = stream(9, "g", 0);
        let pts = mix.sample_iid(20_000, &mut rng);
        let fit = GaussianFit::fit(&pts).unwrap();
        // c = p̂(μ) / N(μ; μ, σI)
        let c = mix.log_density(&[1.0, -2.0]) - (-(2.0 * std::f64::consts::PI * 0.5).ln());
        assert!((fit.log_mass_at_mean(&mix) - c).abs() < 0.05);
        let est = importance_weight_estimate(&pts, &mix, |_| true, 5000, &mut rng).unwrap();
        assert_eq!(est.q_mass, 1.0);
        assert!((est.log_mass - c).abs() < 0.02, "{} vs {c}", est.log_mass);
    }

    #[test]
    fn singular_covariance_is_regularized() {
        let pts = vec![vec![1.0, 2.0]; 5];
        let fit = GaussianFit::fit(&pts).unwrap();
        assert!(fit.log_pdf(&[1.0, 2.0]).is_finite());
    }
}
