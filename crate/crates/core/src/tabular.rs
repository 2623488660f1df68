use crate::error::{Error, Result};
use crate::factored::PROB_TOL;

/// Flat `S x A` model. `transition[(s * A + a) * S + s']`, `reward[s * A + a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
}

impl TabularMdp {
    /// Checks shapes, row stochasticity, and finiteness of rewards.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::validation("tabular MDP needs at least one state and action"));
        }
        if transition.len() != num_states * num_actions * num_states {
            return Err(Error::validation(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                num_states * num_actions * num_states
            )));
        }
        if reward.len() != num_states * num_actions {
            return Err(Error::validation(format!(
                "reward matrix has {} entries, expected {}",
                reward.len(),
                num_states * num_actions
            )));
        }
        for (k, row) in transition.chunks(num_states).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::validation(format!(
                    "row (s={}, a={}) is not a distribution (sum {sum})",
                    k / num_actions,
                    k % num_actions
                )));
            }
        }
        if let Some(k) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::validation(format!("reward entry {k} is not finite")));
        }
        Ok(TabularMdp {
            num_states,
            num_actions,
            transition,
            reward,
        })
    }

    /// Builds from nested `[s][a][s']` and `[s][a]` tables.
    pub fn from_tables(transition: &[Vec<Vec<f64>>], reward: &[Vec<f64>]) -> Result<Self> {
        let ns = transition.len();
        let na = transition.first().map_or(0, |r| r.len());
        let flat_p = transition.iter().flatten().flatten().copied().collect();
        let flat_r = reward.iter().flatten().copied().collect();
        Self::new(ns, na, flat_p, flat_r)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// True when every reward lies in `[0, 1]`.
    pub fn rewards_in_unit_interval(&self) -> bool {
        self.reward.iter().all(|r| (0.0..=1.0).contains(r))
    }

    /// Same dynamics, rewards multiplied by `factor`.
    pub fn scaled_rewards(&self, factor: f64) -> Self {
        TabularMdp {
            reward: self.reward.iter().map(|r| r * factor).collect(),
            ..self.clone()
        }
    }

    /// `sum_s' P(s' | s, a) h(s')`.
    pub fn expect(&self, s: usize, a: usize, h: &[f64]) -> f64 {
        self.row(s, a).iter().zip(h).map(|(p, v)| p * v).sum()
    }

    /// Markov chain and reward vector induced by a deterministic policy.
    pub fn policy_chain(&self, policy: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = self.num_states;
        let mut chain = Vec::with_capacity(n * n);
        let mut reward = Vec::with_capacity(n);
        for (s, &a) in policy.iter().enumerate() {
            chain.extend_from_slice(self.row(s, a));
            reward.push(self.reward(s, a));
        }
        (chain, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(TabularMdp::new(2, 1, vec![0.5, 0.4, 0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(TabularMdp::new(2, 1, vec![0.5, 0.5, 0.0, 1.0], vec![0.0]).is_err());
        assert!(TabularMdp::new(2, 1, vec![0.5, 0.5, 0.0, 1.0], vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn row_layout() {
        let m = TabularMdp::from_tables(
            &[
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.3, 0.7], vec![0.6, 0.4]],
            ],
            &[vec![0.1, 0.2], vec![0.3, 0.4]],
        )
        .unwrap();
        assert_eq!(m.row(1, 0), &[0.3, 0.7]);
        assert_eq!(m.reward(1, 1), 0.4);
        assert!((m.expect(1, 1, &[1.0, 2.0]) - 1.4).abs() < 1e-15);
    }
}
