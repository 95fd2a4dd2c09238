//! Sensor network localization posterior.
//!
//! `N` sensors sit uniformly in `[-L/2, L/2]²`. A pair at distance `r` is
//! observed with probability `exp(-r²/(2R²))`, and an observed distance
//! carries Gaussian noise of standard deviation `σ`. Anchor nodes have known
//! positions and take part in observations like any other node. The
//! posterior over the `2N` unknown coordinates is
//!
//! ```text
//! log p̂ = Σ_{o=1} [ -r²/(2R²) + log N(d - r; 0, σ²) ] + Σ_{o=0} log(1 - exp(-r²/(2R²)))
//! ```
//!
//! restricted to the box (`-inf` outside).

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LogDensity, Target};
use crate::error::{invalid, Result};

/// Below this separation the direction `(x_t - x_u)/r` is taken to be zero.
const COINCIDENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    pub n_sensors: usize,
    /// Side length `L` of the square region.
    pub side: f64,
    /// Observation range scale `R`.
    pub range: f64,
    /// Distance noise standard deviation.
    pub sigma: f64,
}

/// One (possibly unobserved) pair. Node indices below `n_sensors` are
/// unknown sensors; `n_sensors + a` is anchor `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: usize,
    pub u: usize,
    pub o: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub params: SensorParams,
    pub anchors: Vec<[f64; 2]>,
    pub observations: Vec<Observation>,
    pub truth: Option<Vec<[f64; 2]>>,
}

/// On-disk observations file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFile {
    pub pairs: Vec<Observation>,
    pub anchors: Vec<[f64; 2]>,
    pub params: SensorParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<[f64; 2]>>,
}

impl From<SensorFile> for SensorModel {
    fn from(f: SensorFile) -> Self {
        SensorModel {
            params: f.params,
            anchors: f.anchors,
            observations: f.pairs,
            truth: f.truth,
        }
    }
}

impl From<&SensorModel> for SensorFile {
    fn from(m: &SensorModel) -> Self {
        SensorFile {
            pairs: m.observations.clone(),
            anchors: m.anchors.clone(),
            params: m.params,
            truth: m.truth.clone(),
        }
    }
}

impl SensorModel {
    pub fn dim(&self) -> usize {
        2 * self.params.n_sensors
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SensorFile =
            serde_json::from_str(text).map_err(|e| invalid(format!("sensor file: {e}")))?;
        let m = SensorModel::from(f);
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SensorFile::from(self)).expect("serializable")
    }

    /// Flattened true sensor coordinates, if known.
    pub fn truth_vector(&self) -> Option<Vec<f64>> {
        self.truth
            .as_ref()
            .map(|t| t.iter().flat_map(|p| p.iter().copied()).collect())
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        if p.n_sensors == 0 || !(p.side > 0.0) || !(p.range > 0.0) || !(p.sigma > 0.0) {
            return Err(invalid(
                "sensor parameters must be positive (sigma > 0 for a posterior)",
            ));
        }
        let nodes = p.n_sensors + self.anchors.len();
        for ob in &self.observations {
            if ob.t >= nodes || ob.u >= nodes || ob.t == ob.u {
                return Err(invalid(format!("bad pair ({}, {})", ob.t, ob.u)));
            }
            if ob.t >= p.n_sensors && ob.u >= p.n_sensors {
                return Err(invalid("anchor-anchor pairs carry no information"));
            }
            match (ob.o, ob.d) {
                (1, Some(d)) if d.is_finite() => {}
                (0, None) => {}
                _ => {
                    return Err(invalid(format!(
                        "pair ({}, {}): o/d inconsistent",
                        ob.t, ob.u
                    )))
                }
            }
        }
        if let Some(t) = &self.truth {
            if t.len() != p.n_sensors {
                return Err(invalid("truth must list every sensor"));
            }
        }
        Ok(())
    }
}

/// Simulates positions and observations for every sensor-sensor and sensor-anchor pair.
pub fn simulate_sensor_world(
    n_sensors: usize,
    anchors: Vec<[f64; 2]>,
    side: f64,
    range: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<SensorModel> {
    if n_sensors == 0 || !(side > 0.0) || !(range > 0.0) || !(sigma >= 0.0) {
        return Err(invalid("sensor world parameters must be positive"));
    }
    let half = side / 2.0;
    let truth: Vec<[f64; 2]> = (0..n_sensors)
        .map(|_| {
            [
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
            ]
        })
        .collect();
    let pos = |i: usize| {
        if i < n_sensors {
            truth[i]
        } else {
            anchors[i - n_sensors]
        }
    };
    let nodes = n_sensors + anchors.len();
    let mut observations = Vec::new();
    for t in 0..n_sensors {
        for u in (t + 1)..nodes {
            let (a, b) = (pos(t), pos(u));
            let r = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let p_obs = (-0.5 * r * r / (range * range)).exp();
            let seen = rng.random::<f64>() < p_obs;
            let ob = if seen {
                let z: f64 = StandardNormal.sample(rng);
                Observation {
                    t,
                    u,
                    o: 1,
                    d: Some(r + sigma * z),
                }
            } else {
                Observation {
                    t,
                    u,
                    o: 0,
                    d: None,
                }
            };
            observations.push(ob);
        }
    }
    Ok(SensorModel {
        params: SensorParams {
            n_sensors,
            side,
            range,
            sigma,
        },
        anchors,
        observations,
        truth: Some(truth),
    })
}

#[derive(Debug, Clone)]
pub struct SensorPosterior {
    model: SensorModel,
}

impl SensorPosterior {
    pub fn model(&self) -> &SensorModel {
        &self.model
    }

    fn node<'a>(&'a self, x: &'a [f64], i: usize) -> [f64; 2] {
        let n = self.model.params.n_sensors;
        if i < n {
            [x[2 * i], x[2 * i + 1]]
        } else {
            self.model.anchors[i - n]
        }
    }

    fn in_box(&self, x: &[f64]) -> bool {
        let half = self.model.params.side / 2.0;
        x.iter().all(|v| v.abs() <= half)
    }

    /// Log factor of one pair at separation `r`, and its derivative in `r`
    /// split as `(radial_smooth, radial_singular)`: the first multiplies
    /// `(x_t - x_u)` directly, the second multiplies the unit direction.
    fn pair_term(&self, ob: &Observation, r: f64) -> (f64, f64, f64) {
        let p = &self.model.params;
        let r2 = p.range * p.range;
        let a = 0.5 * r * r / r2;
        match ob.d {
            Some(d) => {
                let s2 = p.sigma * p.sigma;
                let resid = d - r;
                let log_norm = -0.5 * (2.0 * std::f64::consts::PI * s2).ln();
                let lp = -a - 0.5 * resid * resid / s2 + log_norm;
                // d/dr = -r/R² + (d - r)/σ²
                (lp, -1.0 / r2, resid / s2)
            }
            None => {
                // log(1 - e^{-a}); d/dr = (r/R²) / expm1(a)
                let lp = (-(-a).exp_m1()).ln();
                let em = a.exp_m1();
                let smooth = if em > 0.0 {
                    1.0 / (r2 * em)
                } else {
                    f64::INFINITY
                };
                (lp, smooth, 0.0)
            }
        }
    }
}

impl LogDensity for SensorPosterior {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.in_box(x) {
            return f64::NEG_INFINITY;
        }
        let mut total = 0.0;
        for ob in &self.model.observations {
            let (a, b) = (self.node(x, ob.t), self.node(x, ob.u));
            let r = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            total += self.pair_term(ob, r).0;
        }
        total
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if !self.in_box(x) {
            return f64::NEG_INFINITY;
        }
        let n = self.model.params.n_sensors;
        let mut total = 0.0;
        for ob in &self.model.observations {
            let (a, b) = (self.node(x, ob.t), self.node(x, ob.u));
            let diff = [a[0] - b[0], a[1] - b[1]];
            let r = (diff[0] * diff[0] + diff[1] * diff[1]).sqrt();
            let (lp, smooth, singular) = self.pair_term(ob, r);
            total += lp;
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let dir_scale = if r < COINCIDENT { 0.0 } else { singular / r };
            let coef = smooth + dir_scale;
            let gx = [coef * diff[0], coef * diff[1]];
            if ob.t < n {
                grad[2 * ob.t] += gx[0];
                grad[2 * ob.t + 1] += gx[1];
            }
            if ob.u < n {
                grad[2 * ob.u] -= gx[0];
                grad[2 * ob.u + 1] -= gx[1];
            }
        }
        if total == f64::NEG_INFINITY {
            grad.iter_mut().for_each(|g| *g = 0.0);
        }
        total
    }
}

/// Wraps a validated sensor model as a target; `mean_truth` holds the true
/// positions when known.
pub fn make_sensor_posterior(model: SensorModel) -> Result<Target> {
    model.validate()?;
    let truth = model.truth_vector();
    Ok(Target::new(Arc::new(SensorPosterior { model }), truth))
}
