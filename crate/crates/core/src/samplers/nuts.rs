//! No-U-turn sampler with slice acceptance and dual-averaging step-size
//! adaptation, identity mass matrix.
//!
//! Warm-up draws are emitted like any other draw and count against the
//! budget. Each leapfrog step costs one density and one gradient evaluation.

use serde::{Deserialize, Serialize};

use super::{Batch, ChainHandle, SamplerParams};
use crate::error::{invalid, Error, Result};
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NutsSettings {
    pub target_accept: f64,
    pub max_depth: u32,
    /// Number of adapting draws per chain.
    pub warmup: u64,
    /// Energy error beyond which a trajectory counts as divergent.
    pub max_energy_error: f64,
}

impl Default for NutsSettings {
    fn default() -> Self {
        Self {
            target_accept: 0.8,
            max_depth: 10,
            warmup: 200,
            max_energy_error: 1000.0,
        }
    }
}

/// Dual-averaging state.
#[derive(Debug, Clone, PartialEq)]
pub struct NutsState {
    pub settings: NutsSettings,
    pub step: f64,
    mu: f64,
    h_bar: f64,
    log_step_bar: f64,
    pub draws: u64,
    initialized: bool,
}

const DA_GAMMA: f64 = 0.05;
const DA_T0: f64 = 10.0;
const DA_KAPPA: f64 = 0.75;

impl NutsState {
    pub fn new(settings: NutsSettings) -> Self {
        Self {
            settings,
            step: 1.0,
            mu: 0.0,
            h_bar: 0.0,
            log_step_bar: 0.0,
            draws: 0,
            initialized: false,
        }
    }

    fn start(&mut self, step: f64) {
        self.step = step;
        self.mu = (10.0 * step).ln();
        self.h_bar = 0.0;
        self.log_step_bar = 0.0;
        self.initialized = true;
    }

    fn adapt(&mut self, accept_stat: f64) {
        if self.draws >= self.settings.warmup {
            return;
        }
        let m = (self.draws + 1) as f64;
        let w = 1.0 / (m + DA_T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.settings.target_accept - accept_stat);
        let log_step = self.mu - m.sqrt() / DA_GAMMA * self.h_bar;
        let eta = m.powf(-DA_KAPPA);
        self.log_step_bar = eta * log_step + (1.0 - eta) * self.log_step_bar;
        self.step = if self.draws + 1 == self.settings.warmup {
            self.log_step_bar.exp()
        } else {
            log_step.exp()
        };
    }
}

/// Phase-space point.
#[derive(Debug, Clone)]
struct Phase {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    lp: f64,
}

impl Phase {
    fn joint(&self) -> f64 {
        self.lp - 0.5 * dot(&self.p, &self.p)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One leapfrog step of size `eps` for `H = -log p̂(q) + |p|²/2`, given the
/// score `grad` at `q`. `eval` returns `(log p̂, ∇ log p̂)` at the new position.
pub fn leapfrog(
    q: &[f64],
    p: &[f64],
    grad: &[f64],
    eps: f64,
    mut eval: impl FnMut(&[f64]) -> (f64, Vec<f64>),
) -> (Vec<f64>, Vec<f64>, f64, Vec<f64>) {
    let p_half: Vec<f64> = p
        .iter()
        .zip(grad)
        .map(|(pi, gi)| pi + 0.5 * eps * gi)
        .collect();
    let q_new: Vec<f64> = q
        .iter()
        .zip(&p_half)
        .map(|(qi, pi)| qi + eps * pi)
        .collect();
    let (lp, g_new) = eval(&q_new);
    let p_new = p_half
        .iter()
        .zip(&g_new)
        .map(|(pi, gi)| pi + 0.5 * eps * gi)
        .collect();
    (q_new, p_new, lp, g_new)
}

struct Tree {
    minus: Phase,
    plus: Phase,
    proposal: Phase,
    n: f64,
    keep_going: bool,
    alpha: f64,
    n_alpha: f64,
}

struct Builder<'a> {
    chain: &'a mut ChainHandle,
    target: &'a Target,
    log_u: f64,
    joint0: f64,
    eps: f64,
    max_energy_error: f64,
    diverged: bool,
}

impl Builder<'_> {
    fn step(&mut self, from: &Phase, dir: f64) -> Phase {
        let (chain, target) = (&mut *self.chain, self.target);
        let (q, p, lp, grad) = leapfrog(&from.q, &from.p, &from.grad, dir * self.eps, |x| {
            chain.eval_with_grad(target, x)
        });
        Phase {
            q,
            p,
            grad,
            lp: if lp.is_nan() { f64::NEG_INFINITY } else { lp },
        }
    }

    fn build(&mut self, from: &Phase, dir: f64, depth: u32) -> Tree {
        if depth == 0 {
            let next = self.step(from, dir);
            let joint = next.joint();
            let joint = if joint.is_nan() {
                f64::NEG_INFINITY
            } else {
                joint
            };
            let n = if self.log_u <= joint { 1.0 } else { 0.0 };
            let keep_going = self.log_u < self.max_energy_error + joint;
            if !keep_going {
                self.diverged = true;
            }
            let alpha = if joint == f64::NEG_INFINITY {
                0.0
            } else {
                (joint - self.joint0).exp().min(1.0)
            };
            return Tree {
                minus: next.clone(),
                plus: next.clone(),
                proposal: next,
                n,
                keep_going,
                alpha,
                n_alpha: 1.0,
            };
        }
        let mut tree = self.build(from, dir, depth - 1);
        if !tree.keep_going {
            return tree;
        }
        let edge = if dir < 0.0 {
            tree.minus.clone()
        } else {
            tree.plus.clone()
        };
        let sub = self.build(&edge, dir, depth - 1);
        if dir < 0.0 {
            tree.minus = sub.minus;
        } else {
            tree.plus = sub.plus;
        }
        let total = tree.n + sub.n;
        if total > 0.0 && self.chain.uniform() < sub.n / total {
            tree.proposal = sub.proposal;
        }
        tree.alpha += sub.alpha;
        tree.n_alpha += sub.n_alpha;
        tree.keep_going = sub.keep_going && no_u_turn(&tree.minus, &tree.plus);
        tree.n = total;
        tree
    }
}

fn no_u_turn(minus: &Phase, plus: &Phase) -> bool {
    let span: Vec<f64> = plus.q.iter().zip(&minus.q).map(|(a, b)| a - b).collect();
    dot(&span, &minus.p) >= 0.0 && dot(&span, &plus.p) >= 0.0
}

fn find_reasonable_step(chain: &mut ChainHandle, target: &Target) -> f64 {
    let d = chain.position.len();
    let start = Phase {
        q: chain.position.clone(),
        p: chain.gaussian_vec(d),
        grad: chain.grad.clone(),
        lp: chain.log_density,
    };
    let joint0 = start.joint();
    let mut eps: f64 = 1.0;
    let log_ratio = |chain: &mut ChainHandle, eps: f64| {
        let (_, p, lp, _) = leapfrog(&start.q, &start.p, &start.grad, eps, |x| {
            chain.eval_with_grad(target, x)
        });
        let j = lp - 0.5 * dot(&p, &p);
        if j.is_nan() {
            f64::NEG_INFINITY
        } else {
            j - joint0
        }
    };
    let first = log_ratio(chain, eps);
    let a: f64 = if first > 0.5f64.ln() { 1.0 } else { -1.0 };
    let mut lr = first;
    for _ in 0..100 {
        if a * lr <= -a * 2f64.ln() {
            break;
        }
        eps *= 2f64.powf(a);
        lr = log_ratio(chain, eps);
    }
    eps
}

/// One NUTS transition; returns the mean acceptance statistic of the trajectory.
fn transition(chain: &mut ChainHandle, target: &Target) -> f64 {
    let state = chain.nuts.as_ref().expect("NUTS chain").clone();
    let d = chain.position.len();
    let current = Phase {
        q: chain.position.clone(),
        p: chain.gaussian_vec(d),
        grad: chain.grad.clone(),
        lp: chain.log_density,
    };
    let joint0 = current.joint();
    let log_u = joint0 + chain.uniform().ln();
    let mut minus = current.clone();
    let mut plus = current.clone();
    let mut accepted = current.clone();
    let mut n = 1.0;
    let mut depth = 0;
    let mut alpha;
    let mut n_alpha;
    let mut builder = Builder {
        chain,
        target,
        log_u,
        joint0,
        eps: state.step,
        max_energy_error: state.settings.max_energy_error,
        diverged: false,
    };
    loop {
        let dir = if builder.chain.uniform() < 0.5 {
            -1.0
        } else {
            1.0
        };
        let tree = if dir < 0.0 {
            builder.build(&minus, dir, depth)
        } else {
            builder.build(&plus, dir, depth)
        };
        if dir < 0.0 {
            minus = tree.minus;
        } else {
            plus = tree.plus;
        }
        alpha = tree.alpha;
        n_alpha = tree.n_alpha;
        if tree.keep_going && builder.chain.uniform() < tree.n / n {
            accepted = tree.proposal;
        }
        n += tree.n;
        depth += 1;
        if !(tree.keep_going && no_u_turn(&minus, &plus)) || depth >= state.settings.max_depth {
            break;
        }
    }
    let diverged = builder.diverged;
    let chain = builder.chain;
    chain.proposed += 1;
    if diverged {
        chain.flagged += 1;
    }
    if accepted.q != chain.position {
        chain.accepted += 1;
        chain.set_state(accepted.q, accepted.lp, accepted.grad);
    }
    if n_alpha > 0.0 {
        alpha / n_alpha
    } else {
        0.0
    }
}

pub fn nuts_batch(chain: &mut ChainHandle, target: &Target, n_b: usize) -> Result<Batch> {
    if !matches!(chain.params, SamplerParams::Nuts(_)) {
        return Err(invalid("nuts_batch called on a non-NUTS chain"));
    }
    if !chain.log_density.is_finite() {
        return Err(Error::NonFinite {
            what: "log-density",
            point: chain.position.clone(),
        });
    }
    let before = chain.evals();
    if !chain.nuts.as_ref().unwrap().initialized {
        let eps = find_reasonable_step(chain, target);
        chain.nuts.as_mut().unwrap().start(eps);
    }
    let mut points = Vec::with_capacity(n_b);
    let mut scores = Vec::with_capacity(n_b);
    for _ in 0..n_b {
        let accept_stat = transition(chain, target);
        let st = chain.nuts.as_mut().unwrap();
        st.adapt(accept_stat);
        st.draws += 1;
        points.push(chain.position.clone());
        scores.push(chain.grad.clone());
    }
    Ok(chain.finish_batch(points, Some(scores), before))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::targets::standard_normal;

    #[test]
    fn leapfrog_on_quadratic_matches_hand_update() {
        // log p̂ = -q²/2, score -q
        let (q, p, eps) = (0.7f64, -0.3f64, 0.25f64);
        let (q1, p1, lp, g) = leapfrog(&[q], &[p], &[-q], eps, |x| {
            (-0.5 * x[0] * x[0], vec![-x[0]])
        });
        let p_half = p - 0.5 * eps * q;
        let q_new = q + eps * p_half;
        let p_new = p_half - 0.5 * eps * q_new;
        assert!((q1[0] - q_new).abs() < 1e-12);
        assert!((p1[0] - p_new).abs() < 1e-12);
        assert!((lp + 0.5 * q_new * q_new).abs() < 1e-12);
        assert!((g[0] + q_new).abs() < 1e-12);
    }

    #[test]
    fn small_steps_conserve_energy() {
        let eval = |x: &[f64]| (-0.5 * dot(x, x), x.iter().map(|v| -v).collect::<Vec<_>>());
        let mut q = vec![1.0, -0.5, 0.25];
        let mut p = vec![0.3, 0.8, -1.1];
        let h0 = 0.5 * dot(&q, &q) + 0.5 * dot(&p, &p);
        let mut g: Vec<f64> = q.iter().map(|v| -v).collect();
        for _ in 0..2000 {
            let (q1, p1, _, g1) = leapfrog(&q, &p, &g, 1e-3, eval);
            q = q1;
            p = p1;
            g = g1;
        }
        let h1 = 0.5 * dot(&q, &q) + 0.5 * dot(&p, &p);
        assert!((h1 - h0).abs() < 1e-4);
    }

    #[test]
    fn gradient_evaluations_match_leapfrog_count() {
        let t = standard_normal(2);
        let mut c = ChainHandle::new(
            0,
            SamplerParams::Nuts(NutsSettings::default()),
            vec![0.5, 0.5],
            stream(1, "c", 0),
            &t,
        )
        .unwrap();
        let b = nuts_batch(&mut c, &t, 20).unwrap();
        assert_eq!(b.evals.density, b.evals.gradient);
        assert!(b.evals.gradient >= 20);
        assert_eq!(c.evals(), t.evals());
    }

    #[test]
    fn warmup_ends_with_averaged_step() {
        let t = standard_normal(3);
        let settings = NutsSettings {
            warmup: 50,
            ..Default::default()
        };
        let mut c = ChainHandle::new(
            0,
            SamplerParams::Nuts(settings),
            vec![0.0; 3],
            stream(2, "c", 0),
            &t,
        )
        .unwrap();
        nuts_batch(&mut c, &t, 50).unwrap();
        let s1 = c.nuts.as_ref().unwrap().step;
        nuts_batch(&mut c, &t, 50).unwrap();
        assert_eq!(c.nuts.as_ref().unwrap().step, s1);
        assert!(s1 > 0.2 && s1 < 3.0, "adapted step {s1}");
    }
}
