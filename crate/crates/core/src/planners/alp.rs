//! Approximate linear programming with per-factor basis functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factored::FactoredMdp;
use crate::planners::lp::{solve_lp, LinearProgram, VarBound};

/// Upper limit on the number of enumerated `(s, a)` constraints.
pub const ALP_ROW_CAP: usize = 1 << 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// `h_i(s) = s_i`, one function per state factor.
    #[default]
    Linear,
    /// `h_{i,v}(s) = 1[s_i = v]`, one function per factor value.
    Indicator,
}

impl Basis {
    pub fn len(self, state_sizes: &[usize]) -> usize {
        match self {
            Basis::Linear => state_sizes.len(),
            Basis::Indicator => state_sizes.iter().sum(),
        }
    }

    /// Values of every basis function at a state tuple.
    pub fn eval(self, state: &[usize], state_sizes: &[usize]) -> Vec<f64> {
        match self {
            Basis::Linear => state.iter().map(|&v| v as f64).collect(),
            Basis::Indicator => {
                let mut out = vec![0.0; self.len(state_sizes)];
                let mut offset = 0;
                for (&v, &size) in state.iter().zip(state_sizes) {
                    out[offset + v] = 1.0;
                    offset += size;
                }
                out
            }
        }
    }

    /// `E[h_j(s') | x]` for every basis function, from the per-factor next-state rows.
    pub fn expectations(self, rows: &[&[f64]]) -> Vec<f64> {
        match self {
            Basis::Linear => rows
                .iter()
                .map(|row| row.iter().enumerate().map(|(v, p)| v as f64 * p).sum())
                .collect(),
            Basis::Indicator => rows.iter().flat_map(|row| row.iter().copied()).collect(),
        }
    }
}

/// Variables `(lambda, w_1..w_k)`; minimize `lambda` subject to one row per flat `(s, a)`:
/// `lambda + sum_j w_j (h_j(s) - E[h_j(s') | s, a]) >= R(s, a)`.
pub fn build_alp(m: &FactoredMdp, basis: Basis) -> Result<LinearProgram> {
    let spec = m.spec();
    let ns = m.num_states();
    let na = m.num_actions();
    let pairs = ns.saturating_mul(na);
    if pairs > ALP_ROW_CAP {
        return Err(Error::Size {
            what: "ALP constraint rows",
            needed: pairs as u128,
            cap: ALP_ROW_CAP as u128,
        });
    }
    let sizes = spec.state_factor_sizes();
    let k = basis.len(sizes);
    let mut objective = vec![0.0; k + 1];
    objective[0] = 1.0;
    let mut lp = LinearProgram::new(objective, vec![VarBound::Free; k + 1])?;
    for s in 0..ns {
        let state = spec.state_tuple(s);
        let here = basis.eval(&state, sizes);
        for a in 0..na {
            let x = spec.joint(s, a);
            let next = basis.expectations(&m.factor_rows(&x));
            let mut row = Vec::with_capacity(k + 1);
            row.push(1.0);
            row.extend(here.iter().zip(&next).map(|(h, e)| h - e));
            lp.add_row(row, m.mean_reward(&x))?;
        }
    }
    Ok(lp)
}

/// Solved ALP: the gain bound `lambda` and basis weights.
#[derive(Clone, Debug, PartialEq)]
pub struct AlpSolution {
    pub gain: f64,
    pub weights: Vec<f64>,
}

pub fn solve_alp(m: &FactoredMdp, basis: Basis, tol: f64) -> Result<AlpSolution> {
    let lp = build_alp(m, basis)?;
    let sol = solve_lp(&lp, tol)?;
    Ok(AlpSolution {
        gain: sol.x[0],
        weights: sol.x[1..].to_vec(),
    })
}

/// `pi(s) = argmax_a R(s, a) + sum_j w_j E[h_j(s') | s, a]`, lowest index on ties.
pub fn greedy_from_weights(m: &FactoredMdp, weights: &[f64], basis: Basis) -> Result<Vec<usize>> {
    let spec = m.spec();
    let k = basis.len(spec.state_factor_sizes());
    if weights.len() != k {
        return Err(Error::validation(format!(
            "{} weights for a basis of {k} functions",
            weights.len()
        )));
    }
    Ok((0..m.num_states())
        .map(|s| {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for a in 0..m.num_actions() {
                let x = spec.joint(s, a);
                let e = basis.expectations(&m.factor_rows(&x));
                let q = m.mean_reward(&x) + weights.iter().zip(&e).map(|(w, v)| w * v).sum::<f64>();
                if q > best {
                    best = q;
                    arg = a;
                }
            }
            arg
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factored::{FactorSpec, RewardDist, RewardFactor, ScopeSet, TransitionFactor};

    fn one_state(reward: f64) -> FactoredMdp {
        FactoredMdp::new(
            FactorSpec::new(vec![1], vec![1]).unwrap(),
            vec![TransitionFactor {
                scope: ScopeSet::new(vec![], 2).unwrap(),
                table: vec![vec![1.0]],
            }],
            vec![RewardFactor {
                scope: ScopeSet::new(vec![], 2).unwrap(),
                max_reward: 1.0,
                table: vec![RewardDist::deterministic(reward)],
            }],
        )
        .unwrap()
    }

    #[test]
    fn single_state_gain_is_reward() {
        let sol = solve_alp(&one_state(0.7), Basis::Linear, 1e-10).unwrap();
        assert!((sol.gain - 0.7).abs() < 1e-12);
    }

    #[test]
    fn indicator_basis_layout() {
        let b = Basis::Indicator;
        assert_eq!(b.eval(&[1, 0], &[2, 3]), vec![0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(Basis::Linear.eval(&[1, 2], &[2, 3]), vec![1.0, 2.0]);
        assert_eq!(Basis::Linear.expectations(&[&[0.5, 0.5], &[0.0, 0.5, 0.5]]), vec![0.5, 1.5]);
    }

    #[test]
    fn zero_weights_give_reward_greedy_policy() {
        // One binary factor, two actions; action 1 pays more in state 0, action 0 in state 1.
        let m = FactoredMdp::new(
            FactorSpec::new(vec![2], vec![2]).unwrap(),
            vec![TransitionFactor {
                scope: ScopeSet::new(vec![0], 2).unwrap(),
                table: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            }],
            vec![RewardFactor {
                scope: ScopeSet::new(vec![0, 1], 2).unwrap(),
                max_reward: 1.0,
                table: [0.1, 0.3, 0.4, 0.2]
                    .iter()
                    .map(|&r| RewardDist::deterministic(r))
                    .collect(),
            }],
        )
        .unwrap();
        assert_eq!(greedy_from_weights(&m, &[0.0], Basis::Linear).unwrap(), vec![1, 0]);
        assert!(greedy_from_weights(&m, &[0.0, 0.0], Basis::Linear).is_err());
    }
}
