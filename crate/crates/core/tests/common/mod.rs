//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use fmdp_core::confidence::{empirical_model, in_confidence_set, VisitStatistics, WidthParams, WidthTables};
use fmdp_core::factored::{sample_index, RewardDist, RewardFactor, TransitionFactor};
use fmdp_core::{FactorSpec, FactoredMdp, ScopeSet, TabularMdp};
use rand::seq::SliceRandom;
use rand::Rng;

/// A distribution with every entry at least `floor / n` before normalization.
pub fn positive_row<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| floor + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Random FMDP with strictly positive rows (hence communicating). Transition
/// factor `i` sees itself, up to `extra_parents` other state factors and every
/// action component; reward factor `i` sees state factor `i` and the actions.
pub fn random_fmdp<R: Rng + ?Sized>(
    rng: &mut R,
    state_sizes: &[usize],
    action_sizes: &[usize],
    extra_parents: usize,
) -> FactoredMdp {
    let m = state_sizes.len();
    let spec = FactorSpec::new(state_sizes.to_vec(), action_sizes.to_vec()).unwrap();
    let n = spec.num_components();
    let sizes = spec.component_sizes().to_vec();
    let actions: Vec<usize> = (m..n).collect();
    let transitions = (0..m)
        .map(|i| {
            let mut others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
            others.shuffle(rng);
            let k = rng.gen_range(0..=extra_parents.min(others.len()));
            let mut idx = vec![i];
            idx.extend(&others[..k]);
            idx.extend(&actions);
            let scope = ScopeSet::new(idx, n).unwrap();
            let table = (0..scope.cardinality(&sizes))
                .map(|_| positive_row(rng, state_sizes[i], 0.1))
                .collect();
            TransitionFactor { scope, table }
        })
        .collect();
    let share = 1.0 / m as f64;
    let rewards = (0..m)
        .map(|i| {
            let mut idx = vec![i];
            idx.extend(&actions);
            let scope = ScopeSet::new(idx, n).unwrap();
            let table = (0..scope.cardinality(&sizes))
                .map(|_| RewardDist::deterministic(share * rng.gen::<f64>()))
                .collect();
            RewardFactor {
                scope,
                max_reward: share,
                table,
            }
        })
        .collect();
    FactoredMdp::new(spec, transitions, rewards).unwrap()
}

/// Random tabular MDP with strictly positive rows and rewards in `[0, 1]`.
pub fn random_tabular<R: Rng + ?Sized>(rng: &mut R, ns: usize, na: usize) -> TabularMdp {
    let mut transition = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        transition.extend(positive_row(rng, ns, 0.05));
    }
    let reward = (0..ns * na).map(|_| rng.gen()).collect();
    TabularMdp::new(ns, na, transition, reward).unwrap()
}

/// Random tabular MDP whose rows are sparse but which stays communicating:
/// action 0 always reaches the next state on a cycle with positive probability.
pub fn random_sparse_communicating<R: Rng + ?Sized>(rng: &mut R, ns: usize, na: usize) -> TabularMdp {
    let mut transition = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            let support: Vec<usize> = (0..ns).filter(|_| rng.gen_bool(0.5)).collect();
            let mut support = if support.is_empty() { vec![rng.gen_range(0..ns)] } else { support };
            if a == 0 && !support.contains(&((s + 1) % ns)) {
                support.push((s + 1) % ns);
            }
            let w = positive_row(rng, support.len(), 0.2);
            for (&j, p) in support.iter().zip(w) {
                row[j] = p;
            }
        }
    }
    let reward = (0..ns * na).map(|_| rng.gen()).collect();
    TabularMdp::new(ns, na, transition, reward).unwrap()
}

/// Statistics from `n` simulated observations per scoped key, resampled until
/// the truth lies inside the confidence set built with `params`.
/// Returns the statistics and the number of rejected draws.
pub fn stats_inside<R: Rng + ?Sized>(
    rng: &mut R,
    truth: &FactoredMdp,
    n: u64,
    params: &WidthParams,
) -> (VisitStatistics, usize) {
    let structure = truth.structure();
    for attempt in 0.. {
        let mut stats = VisitStatistics::new(structure.clone());
        for (i, tf) in truth.transitions().iter().enumerate() {
            for (key, row) in tf.table.iter().enumerate() {
                let mut counts = vec![0u64; row.len()];
                for _ in 0..n {
                    counts[sample_index(row, rng)] += 1;
                }
                stats.set_transition_counts(i, key, &counts).unwrap();
            }
        }
        for (i, rf) in truth.rewards().iter().enumerate() {
            for (key, d) in rf.table.iter().enumerate() {
                // Observations scattered around the mean, inside the support.
                let sum: f64 = (0..n)
                    .map(|_| (d.mean + rf.max_reward * (rng.gen::<f64>() - 0.5) * 0.2).clamp(0.0, rf.max_reward))
                    .sum();
                stats.set_reward_counts(i, key, n, sum);
            }
        }
        let keys: u64 = truth.transitions().iter().map(|t| t.table.len() as u64).sum();
        stats.set_time(n * keys);
        let widths = WidthTables::compute(&stats, params);
        if in_confidence_set(truth, &empirical_model(&stats), &widths).unwrap().inside {
            return (stats, attempt);
        }
    }
    unreachable!()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Every deterministic stationary policy of `m`.
pub fn all_policies(ns: usize, na: usize) -> Vec<Vec<usize>> {
    let total = na.pow(ns as u32);
    (0..total)
        .map(|mut k| {
            (0..ns)
                .map(|_| {
                    let a = k % na;
                    k /= na;
                    a
                })
                .collect()
        })
        .collect()
}

/// Diameter by enumerating policies and solving each hitting-time system.
pub fn diameter_by_linear_systems(m: &TabularMdp) -> f64 {
    let ns = m.num_states();
    let mut worst: f64 = 0.0;
    for target in 0..ns {
        let mut best = vec![f64::INFINITY; ns];
        for pi in all_policies(ns, m.num_actions()) {
            // (I - P_pi restricted to non-target states) E = 1
            let others: Vec<usize> = (0..ns).filter(|&s| s != target).collect();
            let a: Vec<Vec<f64>> = others
                .iter()
                .map(|&s| {
                    let row = m.row(s, pi[s]);
                    others
                        .iter()
                        .map(|&j| f64::from(u8::from(j == s)) - row[j])
                        .collect()
                })
                .collect();
            if let Some(e) = solve_dense(a, vec![1.0; others.len()]) {
                if e.iter().all(|&x| x.is_finite() && x >= -1e-9) {
                    for (k, &s) in others.iter().enumerate() {
                        best[s] = best[s].min(e[k]);
                    }
                }
            }
        }
        best[target] = 0.0;
        worst = worst.max(best.iter().copied().fold(0.0, f64::max));
    }
    worst
}

/// Gain of a unichain policy from its stationary distribution.
pub fn policy_gain_oracle(m: &TabularMdp, pi: &[usize]) -> Option<f64> {
    let ns = m.num_states();
    // mu (I - P) = 0 with sum mu = 1: replace the last equation by normalization.
    let mut a = vec![vec![0.0; ns]; ns];
    for j in 0..ns {
        for s in 0..ns {
            a[j][s] = f64::from(u8::from(j == s)) - m.row(s, pi[s])[j];
        }
    }
    a[ns - 1] = vec![1.0; ns];
    let mut b = vec![0.0; ns];
    b[ns - 1] = 1.0;
    let mu = solve_dense(a, b)?;
    Some((0..ns).map(|s| mu[s] * m.reward(s, pi[s])).sum())
}
