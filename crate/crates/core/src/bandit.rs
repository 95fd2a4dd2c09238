//! Arm selection over block-KSD losses.
//!
//! Rewards are losses: smaller block discrepancies are better, so UCB1
//! minimizes the lower confidence bound `μ̄_i - sqrt(2 ln t / T_i)`. Raw
//! discrepancies are divided by a scale fixed at initialization (the
//! largest initial block KSD) and clipped to `[0, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BanditStrategy {
    Ucb1,
    EpsGreedy,
    /// Round robin: always the least-pulled arm.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmStats {
    pub mean: f64,
    pub pulls: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    arms: Vec<ArmStats>,
    t: u64,
    scale: f64,
    rewards: Vec<Vec<f64>>,
}

impl BanditState {
    /// One pull per arm with the given raw block discrepancies.
    pub fn initialize(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(invalid("bandit needs at least one arm"));
        }
        if raw.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid("initial rewards must be finite and nonnegative"));
        }
        let max = raw.iter().copied().fold(0.0, f64::max);
        let scale = if max > 0.0 { max } else { 1.0 };
        let rewards: Vec<Vec<f64>> = raw.iter().map(|r| vec![(r / scale).min(1.0)]).collect();
        let arms = rewards
            .iter()
            .map(|r| ArmStats {
                mean: r[0],
                pulls: 1,
            })
            .collect();
        Ok(Self {
            arms,
            t: raw.len() as u64,
            scale,
            rewards,
        })
    }

    /// State with the given means and pull counts (for analysis and tests).
    pub fn from_parts(arms: Vec<ArmStats>, scale: f64) -> Self {
        let t = arms.iter().map(|a| a.pulls).sum();
        let rewards = arms.iter().map(|_| Vec::new()).collect();
        Self {
            arms,
            t,
            scale,
            rewards,
        }
    }

    pub fn arms(&self) -> &[ArmStats] {
        &self.arms
    }

    /// Total pulls so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Normalized rewards fed to `arm`, in order.
    pub fn reward_log(&self, arm: usize) -> &[f64] {
        &self.rewards[arm]
    }

    pub fn ucb_index(&self, arm: usize) -> f64 {
        let round = (self.t + 1) as f64;
        let a = &self.arms[arm];
        a.mean - (2.0 * round.ln() / a.pulls as f64).sqrt()
    }

    /// Lowest UCB index among `candidates`; ties go to the lowest arm id.
    pub fn ucb1_select(&self, candidates: &[usize]) -> usize {
        argmin_by(candidates, |i| self.ucb_index(i))
    }

    pub fn greedy_select(&self, candidates: &[usize]) -> usize {
        argmin_by(candidates, |i| self.arms[i].mean)
    }

    /// Greedy with probability `1 - ε`, uniform over `candidates` otherwise.
    pub fn eps_greedy_select_with(
        &self,
        candidates: &[usize],
        eps: f64,
        rng: &mut impl Rng,
    ) -> usize {
        let u: f64 = rng.random();
        if u < eps {
            candidates[rng.random_range(0..candidates.len())]
        } else {
            self.greedy_select(candidates)
        }
    }

    /// `ε = 0.05 / sqrt(t)` for the upcoming round `t`.
    pub fn eps_greedy_select(&self, candidates: &[usize], rng: &mut impl Rng) -> usize {
        self.eps_greedy_select_with(candidates, exploration_rate(self.t + 1), rng)
    }

    pub fn uniform_select(&self, candidates: &[usize]) -> usize {
        argmin_by(candidates, |i| self.arms[i].pulls as f64)
    }

    pub fn select(
        &self,
        strategy: BanditStrategy,
        candidates: &[usize],
        rng: &mut impl Rng,
    ) -> usize {
        match strategy {
            BanditStrategy::Ucb1 => self.ucb1_select(candidates),
            BanditStrategy::EpsGreedy => self.eps_greedy_select(candidates, rng),
            BanditStrategy::Uniform => self.uniform_select(candidates),
        }
    }

    /// Normalizes `raw`, folds it into the arm's running mean and advances `t`.
    /// Returns the normalized reward.
    pub fn normalize_and_update(&mut self, arm: usize, raw: f64) -> f64 {
        let reward = (raw / self.scale).clamp(0.0, 1.0);
        let a = &mut self.arms[arm];
        a.pulls += 1;
        let n = a.pulls as f64;
        a.mean = (1.0 - 1.0 / n) * a.mean + reward / n;
        self.rewards[arm].push(reward);
        self.t += 1;
        reward
    }
}

pub fn exploration_rate(round: u64) -> f64 {
    0.05 / (round as f64).sqrt()
}

fn argmin_by(candidates: &[usize], key: impl Fn(usize) -> f64) -> usize {
    let mut best = candidates[0];
    let mut best_key = key(best);
    for &c in &candidates[1..] {
        let k = key(c);
        if k < best_key || (k == best_key && c < best) {
            best = c;
            best_key = k;
        }
    }
    best
}
