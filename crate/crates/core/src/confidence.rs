//! Visit counts, empirical estimates, and confidence widths.

use crate::error::{Error, Result};
use crate::factored::{
    FactorKind, FactoredMdp, FactoredStructure, RewardDist, RewardFactor, TransitionFactor,
};

/// Online counts over every transition and reward scope.
#[derive(Clone, Debug, PartialEq)]
pub struct VisitStatistics {
    structure: FactoredStructure,
    steps: u64,
    n_p: Vec<Vec<u64>>,
    /// `n_ps[i][key * S_i + s]`
    n_ps: Vec<Vec<u64>>,
    n_r: Vec<Vec<u64>>,
    r_sum: Vec<Vec<f64>>,
}

impl VisitStatistics {
    pub fn new(structure: FactoredStructure) -> Self {
        let m = structure.transition_scopes.len();
        let l = structure.reward_scopes.len();
        let sizes = structure.spec.state_factor_sizes().to_vec();
        let n_p = (0..m)
            .map(|i| vec![0; structure.transition_scope_size(i)])
            .collect();
        let n_ps = (0..m)
            .map(|i| vec![0; structure.transition_scope_size(i) * sizes[i]])
            .collect();
        let n_r = (0..l).map(|i| vec![0; structure.reward_scope_size(i)]).collect();
        let r_sum = (0..l).map(|i| vec![0.0; structure.reward_scope_size(i)]).collect();
        VisitStatistics {
            structure,
            steps: 0,
            n_p,
            n_ps,
            n_r,
            r_sum,
        }
    }

    pub fn structure(&self) -> &FactoredStructure {
        &self.structure
    }

    /// Current time `t`, one more than the number of recorded steps.
    pub fn time(&self) -> u64 {
        self.steps + 1
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Records one transition `x = (s, a)`, per-factor rewards, and the next state.
    pub fn record_step(&mut self, x: &[usize], rewards: &[f64], next: &[usize]) -> Result<()> {
        let spec = &self.structure.spec;
        spec.check_tuple(x)?;
        spec.check_state(next)?;
        if rewards.len() != self.n_r.len() {
            return Err(Error::validation(format!(
                "{} reward components for {} reward factors",
                rewards.len(),
                self.n_r.len()
            )));
        }
        let state_sizes = spec.state_factor_sizes();
        for i in 0..self.n_p.len() {
            let key = self.structure.transition_key(i, x);
            self.n_p[i][key] += 1;
            self.n_ps[i][key * state_sizes[i] + next[i]] += 1;
        }
        for (i, &r) in rewards.iter().enumerate() {
            let key = self.structure.reward_key(i, x);
            self.n_r[i][key] += 1;
            self.r_sum[i][key] += r;
        }
        self.steps += 1;
        Ok(())
    }

    /// `N_{P_i}(x)` for a scoped key.
    pub fn transition_count(&self, i: usize, key: usize) -> u64 {
        self.n_p[i][key]
    }

    /// `N_{P_i}(s, x)`.
    pub fn transition_joint_count(&self, i: usize, key: usize, s: usize) -> u64 {
        self.n_ps[i][key * self.structure.spec.state_factor_sizes()[i] + s]
    }

    pub fn reward_count(&self, i: usize, key: usize) -> u64 {
        self.n_r[i][key]
    }

    pub fn reward_sum(&self, i: usize, key: usize) -> f64 {
        self.r_sum[i][key]
    }

    /// Overwrites the counts of one transition key (synthetic data for tests and studies).
    pub fn set_transition_counts(&mut self, i: usize, key: usize, counts: &[u64]) -> Result<()> {
        let width = self.structure.spec.state_factor_sizes()[i];
        if counts.len() != width {
            return Err(Error::validation(format!(
                "{} counts for a factor with {width} values",
                counts.len()
            )));
        }
        self.n_ps[i][key * width..(key + 1) * width].copy_from_slice(counts);
        self.n_p[i][key] = counts.iter().sum();
        Ok(())
    }

    /// Overwrites the count and reward sum of one reward key.
    pub fn set_reward_counts(&mut self, i: usize, key: usize, count: u64, sum: f64) {
        self.n_r[i][key] = count;
        self.r_sum[i][key] = sum;
    }

    /// Sets the time counter so that `time()` returns `t`.
    pub fn set_time(&mut self, t: u64) {
        self.steps = t.saturating_sub(1);
    }
}

/// `P_hat` and `R_hat` tables on the learner's scopes.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalModel {
    pub structure: FactoredStructure,
    /// `p_hat[i][key][s]`
    pub p_hat: Vec<Vec<Vec<f64>>>,
    /// `r_hat[i][key]`
    pub r_hat: Vec<Vec<f64>>,
}

impl EmpiricalModel {
    /// The estimates as a deterministic-reward FMDP.
    pub fn to_mdp(&self) -> Result<FactoredMdp> {
        self.to_mdp_with(&self.p_hat, &self.r_hat)
    }

    /// An FMDP on the same scopes with the given transition rows and reward means.
    pub fn to_mdp_with(&self, p: &[Vec<Vec<f64>>], r: &[Vec<f64>]) -> Result<FactoredMdp> {
        let s = &self.structure;
        let transitions = s
            .transition_scopes
            .iter()
            .zip(p)
            .map(|(scope, table)| TransitionFactor {
                scope: scope.clone(),
                table: table.clone(),
            })
            .collect();
        let rewards = s
            .reward_scopes
            .iter()
            .zip(r)
            .zip(&s.reward_max)
            .map(|((scope, means), &max)| {
                let max_reward = means.iter().copied().fold(max, f64::max);
                RewardFactor {
                    scope: scope.clone(),
                    max_reward,
                    table: means.iter().map(|&m| RewardDist::deterministic(m)).collect(),
                }
            })
            .collect();
        FactoredMdp::new(s.spec.clone(), transitions, rewards)
    }
}

/// Empirical estimates; unvisited keys get a uniform row and zero reward.
pub fn empirical_model(stats: &VisitStatistics) -> EmpiricalModel {
    let s = stats.structure();
    let sizes = s.spec.state_factor_sizes();
    let p_hat = (0..s.transition_scopes.len())
        .map(|i| {
            let width = sizes[i];
            (0..s.transition_scope_size(i))
                .map(|key| {
                    let n = stats.transition_count(i, key);
                    if n == 0 {
                        vec![1.0 / width as f64; width]
                    } else {
                        (0..width)
                            .map(|v| stats.transition_joint_count(i, key, v) as f64 / n as f64)
                            .collect()
                    }
                })
                .collect()
        })
        .collect();
    let r_hat = (0..s.reward_scopes.len())
        .map(|i| {
            (0..s.reward_scope_size(i))
                .map(|key| stats.reward_sum(i, key) / stats.reward_count(i, key).max(1) as f64)
                .collect()
        })
        .collect();
    EmpiricalModel {
        structure: s.clone(),
        p_hat,
        r_hat,
    }
}

/// Accuracy, episode start time, and the two width coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WidthParams {
    pub rho: f64,
    pub t_k: u64,
    pub c_p: f64,
    pub c_r: f64,
}

pub const DEFAULT_C_P: f64 = 18.0;
pub const DEFAULT_C_R: f64 = 12.0;

impl Default for WidthParams {
    fn default() -> Self {
        WidthParams {
            rho: 0.05,
            t_k: 1,
            c_p: DEFAULT_C_P,
            c_r: DEFAULT_C_R,
        }
    }
}

impl WidthParams {
    /// Both coefficients set to `c`.
    pub fn shared(rho: f64, t_k: u64, c: f64) -> Self {
        WidthParams {
            rho,
            t_k,
            c_p: c,
            c_r: c,
        }
    }
}

fn log_pos(x: f64) -> f64 {
    x.ln().max(0.0)
}

fn transition_log(stats: &VisitStatistics, i: usize, params: &WidthParams) -> f64 {
    let s = stats.structure();
    let m = s.transition_scopes.len() as f64;
    let width = s.spec.state_factor_sizes()[i] as f64;
    let card = s.transition_scope_size(i) as f64;
    log_pos(6.0 * m * width * card * params.t_k as f64 / params.rho)
}

/// `W_{R_i}(x) = sqrt(c_R log(6 l |X[Z_i^R]| t_k / rho) / max(N, 1))`.
pub fn reward_width(stats: &VisitStatistics, i: usize, key: usize, params: &WidthParams) -> f64 {
    let s = stats.structure();
    let l = s.reward_scopes.len() as f64;
    let card = s.reward_scope_size(i) as f64;
    let log = log_pos(6.0 * l * card * params.t_k as f64 / params.rho);
    let n = stats.reward_count(i, key).max(1) as f64;
    (params.c_r * log / n).sqrt()
}

/// `min(chernoff_radius, p)` with `p = P_hat_i(s | x)`.
pub fn transition_width(
    stats: &VisitStatistics,
    i: usize,
    s: usize,
    key: usize,
    params: &WidthParams,
) -> f64 {
    chernoff_radius(stats, i, s, key, params).min(empirical_probability(stats, i, s, key))
}

/// Uncapped `sqrt(c_P p log c_ik / N) + c_P log c_ik / N`; the multiplicative
/// Chernoff deviation that the width truncates at `P_hat`.
pub fn chernoff_radius(stats: &VisitStatistics, i: usize, s: usize, key: usize, params: &WidthParams) -> f64 {
    let n = stats.transition_count(i, key).max(1) as f64;
    let p = empirical_probability(stats, i, s, key);
    let log = transition_log(stats, i, params);
    (params.c_p * p * log / n).sqrt() + params.c_p * log / n
}

fn empirical_probability(stats: &VisitStatistics, i: usize, s: usize, key: usize) -> f64 {
    let n = stats.transition_count(i, key);
    if n == 0 {
        1.0 / stats.structure().spec.state_factor_sizes()[i] as f64
    } else {
        stats.transition_joint_count(i, key, s) as f64 / n as f64
    }
}

/// L1 width `2 sqrt(c_P |S_i| log(6 S_i m |X[Z_i^P]| t_k / rho) / max(N, 1))`.
pub fn l1_width(stats: &VisitStatistics, i: usize, key: usize, params: &WidthParams) -> f64 {
    let width = stats.structure().spec.state_factor_sizes()[i] as f64;
    let n = stats.transition_count(i, key).max(1) as f64;
    2.0 * (params.c_p * width * transition_log(stats, i, params) / n).sqrt()
}

/// Every width for one episode, computed from a snapshot of the statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct WidthTables {
    pub params: WidthParams,
    /// `transition[i][key][s]`
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `l1[i][key]`
    pub l1: Vec<Vec<f64>>,
    /// `reward[i][key]`
    pub reward: Vec<Vec<f64>>,
}

impl WidthTables {
    pub fn compute(stats: &VisitStatistics, params: &WidthParams) -> Self {
        let s = stats.structure();
        let sizes = s.spec.state_factor_sizes();
        let transition = (0..s.transition_scopes.len())
            .map(|i| {
                (0..s.transition_scope_size(i))
                    .map(|key| {
                        (0..sizes[i])
                            .map(|v| transition_width(stats, i, v, key, params))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let l1 = (0..s.transition_scopes.len())
            .map(|i| {
                (0..s.transition_scope_size(i))
                    .map(|key| l1_width(stats, i, key, params))
                    .collect()
            })
            .collect();
        let reward = (0..s.reward_scopes.len())
            .map(|i| {
                (0..s.reward_scope_size(i))
                    .map(|key| reward_width(stats, i, key, params))
                    .collect()
            })
            .collect();
        WidthTables {
            params: *params,
            transition,
            l1,
            reward,
        }
    }

    /// All-zero widths shaped like `model`.
    pub fn zeros(model: &EmpiricalModel, params: WidthParams) -> Self {
        WidthTables {
            params,
            transition: model
                .p_hat
                .iter()
                .map(|t| t.iter().map(|row| vec![0.0; row.len()]).collect())
                .collect(),
            l1: model.p_hat.iter().map(|t| vec![0.0; t.len()]).collect(),
            reward: model.r_hat.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }
}

/// One confidence-set entry the truth falls outside of.
#[derive(Clone, Debug, PartialEq)]
pub struct SlackEntry {
    pub kind: FactorKind,
    pub factor: usize,
    pub key: usize,
    /// Next-state value for transition entries.
    pub value: Option<usize>,
    pub deviation: f64,
    pub width: f64,
}

impl SlackEntry {
    pub fn slack(&self) -> f64 {
        self.width - self.deviation
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceCheck {
    pub inside: bool,
    /// Smallest `width - |deviation|` over all entries.
    pub min_slack: f64,
    pub violations: Vec<SlackEntry>,
}

const MEMBERSHIP_TOL: f64 = 1e-12;

/// Whether `truth` lies in the set defined by `model` and `widths`, entrywise.
pub fn in_confidence_set(
    truth: &FactoredMdp,
    model: &EmpiricalModel,
    widths: &WidthTables,
) -> Result<ConfidenceCheck> {
    let s = &model.structure;
    if truth.structure().transition_scopes != s.transition_scopes
        || truth.structure().reward_scopes != s.reward_scopes
        || truth.spec() != &s.spec
    {
        return Err(Error::validation("true model and estimates use different scopes"));
    }
    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    let mut check = |entry: SlackEntry| {
        min_slack = min_slack.min(entry.slack());
        if entry.deviation > entry.width + MEMBERSHIP_TOL {
            violations.push(entry);
        }
    };
    for (i, tf) in truth.transitions().iter().enumerate() {
        for (key, row) in tf.table.iter().enumerate() {
            for (v, &p) in row.iter().enumerate() {
                check(SlackEntry {
                    kind: FactorKind::Transition,
                    factor: i,
                    key,
                    value: Some(v),
                    deviation: (p - model.p_hat[i][key][v]).abs(),
                    width: widths.transition[i][key][v],
                });
            }
        }
    }
    for (i, rf) in truth.rewards().iter().enumerate() {
        for (key, dist) in rf.table.iter().enumerate() {
            check(SlackEntry {
                kind: FactorKind::Reward,
                factor: i,
                key,
                value: None,
                deviation: (dist.mean - model.r_hat[i][key]).abs(),
                width: widths.reward[i][key],
            });
        }
    }
    Ok(ConfidenceCheck {
        inside: violations.is_empty(),
        min_slack,
        violations,
    })
}
