use crate::confidence::{empirical_model, VisitStatistics};
use crate::error::{Error, Result};
use crate::factored::{product_distribution, DEFAULT_FLATTEN_CAP};
use crate::planners::{Plan, PlannerChoice};
use crate::solve::{relative_value_iteration, RviOptions};
use crate::tabular::TabularMdp;

/// The optimistic known-pair model with one extra absorbing state of reward 1.
///
/// A flat `(s, a)` is known when every transition and reward key it touches
/// has at least `m_known` visits; known pairs use the empirical estimates,
/// unknown pairs jump to the extra state (index `S`).
pub fn known_model(stats: &VisitStatistics, m_known: u64) -> Result<TabularMdp> {
    let model = empirical_model(stats);
    let st = stats.structure();
    let spec = &st.spec;
    let ns = spec.num_states();
    let na = spec.num_actions();
    let n = ns + 1;
    let needed = (n as u128) * (na as u128) * (n as u128);
    if needed > DEFAULT_FLATTEN_CAP {
        return Err(Error::Size {
            what: "known-pair model",
            needed,
            cap: DEFAULT_FLATTEN_CAP,
        });
    }
    let mut transition = Vec::with_capacity(n * na * n);
    let mut reward = Vec::with_capacity(n * na);
    for s in 0..ns {
        for a in 0..na {
            let x = spec.joint(s, a);
            let t_keys: Vec<usize> = (0..st.transition_scopes.len())
                .map(|i| st.transition_key(i, &x))
                .collect();
            let r_keys: Vec<usize> = (0..st.reward_scopes.len())
                .map(|i| st.reward_key(i, &x))
                .collect();
            let known = t_keys
                .iter()
                .enumerate()
                .all(|(i, &k)| stats.transition_count(i, k) >= m_known)
                && r_keys
                    .iter()
                    .enumerate()
                    .all(|(i, &k)| stats.reward_count(i, k) >= m_known);
            if known {
                let rows: Vec<&[f64]> = t_keys
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| model.p_hat[i][k].as_slice())
                    .collect();
                transition.extend(product_distribution(&rows));
                transition.push(0.0);
                reward.push(r_keys.iter().enumerate().map(|(i, &k)| model.r_hat[i][k]).sum());
            } else {
                transition.extend(std::iter::repeat_n(0.0, ns));
                transition.push(1.0);
                reward.push(1.0);
            }
        }
    }
    for _ in 0..na {
        transition.extend(std::iter::repeat_n(0.0, ns));
        transition.push(1.0);
        reward.push(1.0);
    }
    TabularMdp::new(n, na, transition, reward)
}

/// Plans exactly on [`known_model`]; the returned policy covers the real states only.
///
/// The model is multichain whenever some pair is unknown, so value
/// iteration stops once every state's gain estimate settles.
pub fn frmax_episode(
    stats: &VisitStatistics,
    m_known: u64,
    planner: &PlannerChoice,
    warm: Option<&[f64]>,
) -> Result<Plan> {
    let tab = known_model(stats, m_known)?;
    let opts = RviOptions {
        tol: planner.tol,
        max_iters: planner.max_iters,
        multichain: true,
        ..Default::default()
    };
    let report = relative_value_iteration(&tab, &opts, warm)?;
    let ns = tab.num_states() - 1;
    let mut policy = report.policy;
    policy.truncate(ns);
    Ok(Plan {
        policy,
        gain: report.gain_bias.gain,
        bias: Some(report.gain_bias.bias),
        iterations: report.iterations,
    })
}
