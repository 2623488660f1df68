//! Approximate span-constrained optimism.
//!
//! The exact oracle maximizes the optimal gain over the confidence set
//! subject to `Q(h) <= Q`. This version searches a finite candidate set:
//! random models inside the widths, the extended model's extreme models
//! (one per target state), and the empirical model itself.

use rand::Rng;

use crate::agents::AgentConfig;
use crate::confidence::{empirical_model, EmpiricalModel, VisitStatistics, WidthTables};
use crate::error::Result;
use crate::extended::extreme_dynamic;
use crate::planners::{plan, Plan, PlannerChoice};
use crate::solve::{factored_span, relative_value_iteration};

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        acc += u;
        let t = (acc - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

struct Candidate {
    p: Vec<Vec<Vec<f64>>>,
    r: Vec<Vec<f64>>,
}

fn random_candidate<R: Rng + ?Sized>(model: &EmpiricalModel, widths: &WidthTables, rng: &mut R) -> Candidate {
    let p = model
        .p_hat
        .iter()
        .zip(&widths.transition)
        .map(|(rows, wrows)| {
            rows.iter()
                .zip(wrows)
                .map(|(row, w)| {
                    let moved: Vec<f64> = row
                        .iter()
                        .zip(w)
                        .map(|(&p, &w)| p + w * rng.gen_range(-1.0..=1.0))
                        .collect();
                    project_to_simplex(&moved)
                })
                .collect()
        })
        .collect();
    let r = model
        .r_hat
        .iter()
        .zip(&widths.reward)
        .zip(&model.structure.reward_max)
        .map(|((means, w), &max)| {
            means
                .iter()
                .zip(w)
                .map(|(&m, &w)| (m + w * rng.gen_range(-1.0..=1.0)).clamp(0.0, max))
                .collect()
        })
        .collect();
    Candidate { p, r }
}

fn extreme_candidate(model: &EmpiricalModel, widths: &WidthTables, target: &[usize]) -> Result<Candidate> {
    let p = model
        .p_hat
        .iter()
        .zip(&widths.transition)
        .zip(target)
        .map(|((rows, wrows), &t)| {
            rows.iter()
                .zip(wrows)
                .map(|(row, w)| extreme_dynamic(row, w, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let r = model
        .r_hat
        .iter()
        .zip(&widths.reward)
        .map(|(means, w)| means.iter().zip(w).map(|(m, w)| m + w).collect())
        .collect();
    Ok(Candidate { p, r })
}

/// Best-gain candidate with `Q(h)` within budget, or the empirical plan when none qualifies.
pub fn fsrl_episode<R: Rng + ?Sized>(stats: &VisitStatistics, cfg: &AgentConfig, rng: &mut R) -> Result<Plan> {
    let model = empirical_model(stats);
    let widths = WidthTables::compute(stats, &cfg.width_params(stats.time()));
    let budget = cfg.span_budget.unwrap_or(f64::INFINITY);
    let spec = &model.structure.spec;
    let sizes = spec.state_factor_sizes();

    let mut candidates = Vec::with_capacity(cfg.candidates + spec.num_states() + 1);
    candidates.push(Candidate {
        p: model.p_hat.clone(),
        r: model.r_hat.clone(),
    });
    for t in 0..spec.num_states() {
        candidates.push(extreme_candidate(&model, &widths, &spec.state_tuple(t))?);
    }
    for _ in 0..cfg.candidates {
        candidates.push(random_candidate(&model, &widths, rng));
    }

    let opts = cfg.planner.rvi_options();
    let mut best: Option<Plan> = None;
    for cand in &candidates {
        let mdp = model.to_mdp_with(&cand.p, &cand.r)?;
        let Ok(report) = relative_value_iteration(&mdp.flatten()?, &opts, None) else {
            continue;
        };
        let q = factored_span(report.bias(), sizes)?.q;
        if q > budget + 1e-12 {
            continue;
        }
        if best.as_ref().is_none_or(|b| report.gain() > b.gain) {
            best = Some(Plan {
                gain: report.gain(),
                policy: report.policy,
                bias: Some(report.gain_bias.bias),
                iterations: report.iterations,
            });
        }
    }
    match best {
        Some(p) => Ok(p),
        None => plan(&model.to_mdp()?, &PlannerChoice { ..cfg.planner }),
    }
}
