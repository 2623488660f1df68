use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::agents::AgentConfig;
use crate::confidence::{empirical_model, VisitStatistics};
use crate::error::Result;
use crate::factored::{sample_truncated_normal, FactoredMdp};
use crate::planners::{plan_warm, Plan};

/// Dirichlet draw computed in log space, so tiny concentrations do not underflow to zero.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            // Gamma(a) = Gamma(a + 1) * U^(1 / a) keeps the shape at least 1.
            let g = Gamma::new(a + 1.0, 1.0).expect("shape is positive");
            let u: f64 = rng.gen();
            g.sample(rng).ln() + u.ln() / a
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// One posterior sample: `P_i(x) ~ Dirichlet((N(., x) + 1) / c)` and
/// `R_i(x) ~ Normal(R_hat_i(x), c / max(1, N(x)))` truncated to `[0, 1]`.
///
/// The reward variance uses the visit count of the reward key itself.
pub fn sample_posterior<R: Rng + ?Sized>(stats: &VisitStatistics, c: f64, rng: &mut R) -> Result<FactoredMdp> {
    let model = empirical_model(stats);
    let s = stats.structure();
    let sizes = s.spec.state_factor_sizes();
    let p: Vec<Vec<Vec<f64>>> = (0..s.transition_scopes.len())
        .map(|i| {
            (0..s.transition_scope_size(i))
                .map(|key| {
                    let alpha: Vec<f64> = (0..sizes[i])
                        .map(|v| (stats.transition_joint_count(i, key, v) as f64 + 1.0) / c)
                        .collect();
                    sample_dirichlet(&alpha, rng)
                })
                .collect()
        })
        .collect();
    let r: Vec<Vec<f64>> = (0..s.reward_scopes.len())
        .map(|i| {
            (0..s.reward_scope_size(i))
                .map(|key| {
                    let n = stats.reward_count(i, key).max(1) as f64;
                    sample_truncated_normal(model.r_hat[i][key], (c / n).sqrt(), 0.0, 1.0, rng)
                })
                .collect()
        })
        .collect();
    model.to_mdp_with(&p, &r)
}

pub fn psrl_episode<R: Rng + ?Sized>(
    stats: &VisitStatistics,
    cfg: &AgentConfig,
    rng: &mut R,
    warm: Option<&[f64]>,
) -> Result<Plan> {
    let sampled = sample_posterior(stats, cfg.psrl_scale(), rng)?;
    plan_warm(&sampled, &cfg.planner, warm)
}
