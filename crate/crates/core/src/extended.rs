//! The optimistic extended FMDP.
//!
//! Each transition factor gets an extra action coordinate, a target value in
//! `S_i`, and moves all of its width mass onto that target. Jointly the
//! extra coordinates form a target state, so the extended action set is
//! `A x S`. Flat extended actions are mixed-radix with the original action
//! least significant: `ext = a + A * target`.

use std::cell::RefCell;

use crate::confidence::{EmpiricalModel, WidthTables};
use crate::error::{Error, Result};
use crate::factored::{
    product_distribution, FactorSpec, FactoredMdp, RewardDist, RewardFactor, ScopeSet,
    TransitionFactor, DEFAULT_FLATTEN_CAP,
};
use crate::planners::{plan_warm, Plan, PlannerChoice, PlannerKind};
use crate::solve::{
    diameter, factored_span, relative_value_iteration, AverageRewardModel, Diameter, RviOptions,
    SolveReport,
};
use crate::tabular::TabularMdp;

/// Slack allowed when checking `w <= p_hat`.
const WIDTH_TOL: f64 = 1e-12;

/// `p_hat - w + 1_target * sum(w)`.
pub fn extreme_dynamic(p_hat: &[f64], w: &[f64], target: usize) -> Result<Vec<f64>> {
    if p_hat.len() != w.len() || target >= p_hat.len() {
        return Err(Error::Construction(format!(
            "extreme dynamic over {} values with {} widths and target {target}",
            p_hat.len(),
            w.len()
        )));
    }
    if let Some(j) = (0..w.len()).find(|&j| !(w[j] >= 0.0 && w[j] <= p_hat[j] + WIDTH_TOL)) {
        return Err(Error::Construction(format!(
            "width {} at value {j} is outside [0, {}]",
            w[j], p_hat[j]
        )));
    }
    let total: f64 = w.iter().sum();
    let mut out: Vec<f64> = p_hat.iter().zip(w).map(|(p, w)| (p - w).max(0.0)).collect();
    out[target] += total;
    Ok(out)
}

/// Table sizes of the extended factors against the `L * W` bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim1Report {
    pub l: usize,
    pub w: usize,
    pub transition_sizes: Vec<usize>,
    pub reward_sizes: Vec<usize>,
}

impl Claim1Report {
    pub fn bound(&self) -> usize {
        self.l * self.w
    }

    pub fn holds(&self) -> bool {
        let b = self.bound();
        self.transition_sizes
            .iter()
            .chain(&self.reward_sizes)
            .all(|&s| s <= b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedFmdp {
    base: FactorSpec,
    mdp: FactoredMdp,
    claim1: Claim1Report,
}

/// Builds the extended FMDP from an empirical model and its widths.
///
/// Rewards are `R_hat + W_R`, unclipped.
pub fn build_extended(model: &EmpiricalModel, widths: &WidthTables) -> Result<ExtendedFmdp> {
    let st = &model.structure;
    let base = st.spec.clone();
    let m = base.num_state_factors();
    let n = base.num_components();
    let state_sizes = base.state_factor_sizes().to_vec();
    if widths.transition.len() != m || widths.reward.len() != st.reward_scopes.len() {
        return Err(Error::Construction("width tables do not match the model".into()));
    }
    let mut action_sizes = base.action_sizes().to_vec();
    action_sizes.extend_from_slice(&state_sizes);
    let spec = FactorSpec::new(state_sizes.clone(), action_sizes)?;
    let ext_n = spec.num_components();

    let mut transitions = Vec::with_capacity(m);
    for i in 0..m {
        let mut idx = st.transition_scopes[i].indices().to_vec();
        idx.push(n + i);
        let scope = ScopeSet::new(idx, ext_n)?;
        let rows = &model.p_hat[i];
        let w = &widths.transition[i];
        if w.len() != rows.len() {
            return Err(Error::Construction(format!(
                "transition factor {i}: {} width rows for {} keys",
                w.len(),
                rows.len()
            )));
        }
        // The target coordinate has the highest index, so it is the most significant key digit.
        let mut table = Vec::with_capacity(rows.len() * state_sizes[i]);
        for t in 0..state_sizes[i] {
            for (p, wr) in rows.iter().zip(w) {
                table.push(extreme_dynamic(p, wr, t)?);
            }
        }
        transitions.push(TransitionFactor { scope, table });
    }

    let mut rewards = Vec::with_capacity(st.reward_scopes.len());
    for (i, scope) in st.reward_scopes.iter().enumerate() {
        let means: Vec<f64> = model.r_hat[i]
            .iter()
            .zip(&widths.reward[i])
            .map(|(r, w)| r + w)
            .collect();
        let max_reward = means.iter().copied().fold(st.reward_max[i], f64::max);
        rewards.push(RewardFactor {
            scope: ScopeSet::new(scope.indices().to_vec(), ext_n)?,
            max_reward,
            table: means.into_iter().map(RewardDist::deterministic).collect(),
        });
    }

    let mdp = FactoredMdp::new(spec, transitions, rewards)?;
    let sizes = mdp.spec().component_sizes();
    let claim1 = Claim1Report {
        l: st.max_scope_size(),
        w: base.max_factor_size(),
        transition_sizes: mdp.transitions().iter().map(|t| t.scope.cardinality(sizes)).collect(),
        reward_sizes: mdp.rewards().iter().map(|r| r.scope.cardinality(sizes)).collect(),
    };
    Ok(ExtendedFmdp { base, mdp, claim1 })
}

impl ExtendedFmdp {
    pub fn base_spec(&self) -> &FactorSpec {
        &self.base
    }

    /// The extended model as an ordinary FMDP over `A x S`.
    pub fn mdp(&self) -> &FactoredMdp {
        &self.mdp
    }

    pub fn claim1(&self) -> &Claim1Report {
        &self.claim1
    }

    pub fn extended_action(&self, action: usize, target: usize) -> usize {
        action + self.base.num_actions() * target
    }

    /// `f`: the original action and target state of a flat extended action.
    pub fn split_action(&self, ext: usize) -> (usize, usize) {
        let a = self.base.num_actions();
        (ext % a, ext / a)
    }

    pub fn flatten(&self) -> Result<TabularMdp> {
        self.mdp.flatten_with_cap(DEFAULT_FLATTEN_CAP)
    }

    /// Per-factor next-state rows for `(s, a)` and target state `target`.
    pub fn rows(&self, state: usize, action: usize, target: usize) -> Vec<&[f64]> {
        let x = self.mdp.spec().joint(state, self.extended_action(action, target));
        self.mdp.factor_rows(&x)
    }

    /// Exact optimal planning over `A x S` without flattening.
    ///
    /// The maximization over target states is contracted factor by factor,
    /// so one backup costs about `m * prod(S_i) * max(S_i)` per `(s, a)`.
    pub fn solve(&self, opts: &RviOptions, warm: Option<&[f64]>) -> Result<ExtendedSolve> {
        let report = self.solve_actions(opts, warm)?;
        let ext_policy = report
            .policy
            .iter()
            .enumerate()
            .map(|(s, &a)| self.extended_action(a, self.best_target(s, a, report.bias())))
            .collect();
        Ok(ExtendedSolve { report, ext_policy })
    }

    /// Structured solve whose policy holds original actions only.
    fn solve_actions(&self, opts: &RviOptions, warm: Option<&[f64]>) -> Result<SolveReport> {
        relative_value_iteration(&StructuredExtended::new(self), opts, warm)
    }

    /// Target state maximizing the expected bias, lowest flat index on ties.
    pub fn best_target(&self, state: usize, action: usize, h: &[f64]) -> usize {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for t in 0..self.base.num_states() {
            let dist = product_distribution(&self.rows(state, action, t));
            let v: f64 = dist.iter().zip(h).map(|(p, x)| p * x).sum();
            if v > best {
                best = v;
                arg = t;
            }
        }
        arg
    }
}

/// Structured solve result; `report.policy` already holds original actions.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedSolve {
    pub report: SolveReport,
    pub ext_policy: Vec<usize>,
}

/// The extended MDP seen as an `S x A` model whose backup maximizes over targets.
struct StructuredExtended<'a> {
    ext: &'a ExtendedFmdp,
    na: usize,
    m: usize,
    state_sizes: Vec<usize>,
    /// `prefix[i] = prod_{j < i} S_j`
    prefix: Vec<usize>,
    /// Base key count `|X[Z_i^P]|` per factor.
    cards: Vec<usize>,
    /// `keys[(s * A + a) * m + i]`
    keys: Vec<usize>,
    /// Whether any target changes factor `i`'s row at the key.
    branches: Vec<bool>,
    rewards: Vec<f64>,
    scratch: RefCell<Scratch>,
}

impl<'a> StructuredExtended<'a> {
    fn new(ext: &'a ExtendedFmdp) -> Self {
        let spec = ext.mdp.spec();
        let ns = ext.base.num_states();
        let na = ext.base.num_actions();
        let m = ext.base.num_state_factors();
        let state_sizes = ext.base.state_factor_sizes().to_vec();
        let mut prefix = vec![1; m + 1];
        for i in 0..m {
            prefix[i + 1] = prefix[i] * state_sizes[i];
        }
        let cards: Vec<usize> = ext
            .mdp
            .transitions()
            .iter()
            .zip(&state_sizes)
            .map(|(t, s)| t.table.len() / s)
            .collect();
        let mut keys = Vec::with_capacity(ns * na * m);
        let mut branches = Vec::with_capacity(ns * na * m);
        let mut rewards = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                // Target 0 gives the base key directly.
                let x = spec.joint(s, a);
                for (i, tf) in ext.mdp.transitions().iter().enumerate() {
                    let key = tf.scope.key(&x, spec.component_sizes());
                    keys.push(key);
                    let first = &tf.table[key];
                    let differs = (1..state_sizes[i]).any(|t| tf.table[key + cards[i] * t] != *first);
                    branches.push(differs);
                }
                rewards.push(ext.mdp.mean_reward(&x));
            }
        }
        StructuredExtended {
            ext,
            na,
            m,
            state_sizes,
            prefix,
            cards,
            keys,
            branches,
            rewards,
            scratch: RefCell::new(Scratch {
                cur: vec![0.0; ns],
                next: vec![0.0; ns],
            }),
        }
    }

    /// `max_t sum_v P_t(v | pair) h(v)`, contracting the most significant
    /// factor first. Every open target branch is kept as its own block, so a
    /// level holds at most `S` values.
    fn contract(&self, pair: usize, h: &[f64], scratch: &mut Scratch) -> f64 {
        let Scratch { cur, next } = scratch;
        // Every level holds at most `S` values, so both buffers keep length `S`.
        let mut len = h.len();
        cur[..len].copy_from_slice(h);
        // Blocks start state-major (`branch * block + offset`); once branches
        // outnumber the stride they are stored branch-fastest
        // (`offset * branches + branch`) so inner loops stay long.
        let mut branch_fast = false;
        let mut branches = 1;
        for i in (0..self.m).rev() {
            let stride = self.prefix[i];
            let size = self.state_sizes[i];
            let block = stride * size;
            let key = self.keys[pair * self.m + i];
            let table = &self.ext.mdp.transitions()[i].table;
            let targets = if self.branches[pair * self.m + i] { size } else { 1 };
            if !branch_fast && stride < branches {
                for b in 0..branches {
                    for w in 0..block {
                        next[w * branches + b] = cur[b * block + w];
                    }
                }
                std::mem::swap(cur, next);
                branch_fast = true;
            }
            let out = branches * targets;
            for t in 0..targets {
                let row = &table[key + self.cards[i] * t];
                let mut first = true;
                for (v, &p) in row.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let apply = |dst: &mut [f64], src: &[f64]| {
                        if first {
                            dst.iter_mut().zip(src).for_each(|(o, &x)| *o = p * x);
                        } else {
                            dst.iter_mut().zip(src).for_each(|(o, &x)| *o += p * x);
                        }
                    };
                    if branch_fast {
                        for u in 0..stride {
                            apply(
                                &mut next[u * out + t * branches..][..branches],
                                &cur[(v * stride + u) * branches..][..branches],
                            );
                        }
                    } else {
                        for b in 0..branches {
                            apply(
                                &mut next[(b * targets + t) * stride..][..stride],
                                &cur[b * block + v * stride..][..stride],
                            );
                        }
                    }
                    first = false;
                }
            }
            std::mem::swap(cur, next);
            branches = out;
            len = out * stride;
        }
        cur[..len].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Scratch {
    cur: Vec<f64>,
    next: Vec<f64>,
}

impl AverageRewardModel for StructuredExtended<'_> {
    fn num_states(&self) -> usize {
        self.ext.base.num_states()
    }

    fn num_actions(&self) -> usize {
        self.na
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.na + a]
    }

    fn expect(&self, s: usize, a: usize, h: &[f64]) -> f64 {
        self.contract(s * self.na + a, h, &mut self.scratch.borrow_mut())
    }
}

/// Plans on the extended model and maps the result back to original actions.
pub fn plan_extended(
    ext: &ExtendedFmdp,
    choice: &PlannerChoice,
    warm: Option<&[f64]>,
) -> Result<Plan> {
    match choice.kind {
        PlannerKind::Exact => {
            let report = ext.solve_actions(&choice.rvi_options(), warm)?;
            Ok(Plan {
                gain: report.gain(),
                policy: report.policy,
                bias: Some(report.gain_bias.bias),
                iterations: report.iterations,
            })
        }
        PlannerKind::Alp => {
            let p = plan_warm(&ext.mdp, choice, None)?;
            Ok(Plan {
                policy: map_policy(&p.policy, ext.base.num_actions()),
                ..p
            })
        }
    }
}

/// `pi(s)`: the original-action component of `pi_ext(s)`.
pub fn map_policy(ext_policy: &[usize], num_actions: usize) -> Vec<usize> {
    ext_policy.iter().map(|&e| e % num_actions).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimismCheck {
    pub holds: bool,
    /// `min_s ((P_ext(pi_ext) - P(pi)) h)(s)`
    pub min_difference: f64,
    pub worst_state: usize,
    pub target: usize,
}

/// Evaluates `(P(M_k, pi_ext) - P(M, pi)) h >= -1e-9` with every factor aimed at `argmax h`.
pub fn optimism_predicate(
    truth: &FactoredMdp,
    ext: &ExtendedFmdp,
    h: &[f64],
    policy: &[usize],
) -> Result<OptimismCheck> {
    let ns = truth.num_states();
    if h.len() != ns || policy.len() != ns || truth.spec() != ext.base_spec() {
        return Err(Error::validation("bias, policy, and models must share the state space"));
    }
    let mut target = 0;
    for (s, &v) in h.iter().enumerate() {
        if v > h[target] {
            target = s;
        }
    }
    let mut min_difference = f64::INFINITY;
    let mut worst_state = 0;
    for (s, &a) in policy.iter().enumerate() {
        let x = truth.spec().joint(s, a);
        let p = product_distribution(&truth.factor_rows(&x));
        let q = product_distribution(&ext.rows(s, a, target));
        let d: f64 = q.iter().zip(&p).zip(h).map(|((q, p), v)| (q - p) * v).sum();
        if d < min_difference {
            min_difference = d;
            worst_state = s;
        }
    }
    Ok(OptimismCheck {
        holds: min_difference >= -1e-9,
        min_difference,
        worst_state,
        target,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiameterComparison {
    pub extended: Diameter,
    pub truth: Diameter,
    pub holds: bool,
}

/// `D(extended) <= D(truth) + 1e-6` on the flattened models.
pub fn extended_diameter_predicate(
    truth: &FactoredMdp,
    ext: &ExtendedFmdp,
    cap: f64,
) -> Result<DiameterComparison> {
    let de = diameter(&ext.flatten()?, cap).value;
    let dt = diameter(&truth.flatten()?, cap).value;
    let holds = match (de, dt) {
        (_, Diameter::Infinite) => true,
        (Diameter::Finite(e), Diameter::Finite(t)) => e <= t + 1e-6,
        (Diameter::Infinite, Diameter::Finite(_)) => false,
    };
    Ok(DiameterComparison {
        extended: de,
        truth: dt,
        holds,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `sum_s (P_ext(s) - P(s)) h(s) <= sum_i |P_i - P_ext_i|_1 sp_i(h)` for product laws.
pub fn factored_deviation_bound(
    p_rows: &[Vec<f64>],
    q_rows: &[Vec<f64>],
    h: &[f64],
    state_sizes: &[usize],
) -> Result<DeviationBound> {
    let shapes_ok = p_rows.len() == state_sizes.len()
        && q_rows.len() == state_sizes.len()
        && p_rows
            .iter()
            .zip(q_rows)
            .zip(state_sizes)
            .all(|((p, q), &s)| p.len() == s && q.len() == s);
    if !shapes_ok {
        return Err(Error::validation("factored rows do not match the factor sizes"));
    }
    let profile = factored_span(h, state_sizes)?;
    let p_refs: Vec<&[f64]> = p_rows.iter().map(Vec::as_slice).collect();
    let q_refs: Vec<&[f64]> = q_rows.iter().map(Vec::as_slice).collect();
    let p = product_distribution(&p_refs);
    let q = product_distribution(&q_refs);
    let lhs: f64 = q.iter().zip(&p).zip(h).map(|((q, p), v)| (q - p) * v).sum();
    let rhs: f64 = p_rows
        .iter()
        .zip(q_rows)
        .zip(&profile.factored_spans)
        .map(|((p, q), sp)| p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() * sp)
        .sum();
    Ok(DeviationBound {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::{empirical_model, VisitStatistics, WidthParams};
    use crate::factored::FactoredStructure;

    #[test]
    fn figure_one_redistribution() {
        let q = extreme_dynamic(&[0.5, 0.3, 0.2], &[0.1, 0.05, 0.05], 1).unwrap();
        for (a, b) in q.iter().zip([0.4, 0.45, 0.15]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_and_full_width() {
        let p = [0.2, 0.3, 0.5];
        for t in 0..3 {
            assert_eq!(extreme_dynamic(&p, &[0.0; 3], t).unwrap(), p.to_vec());
            let mut point = vec![0.0; 3];
            point[t] = 1.0;
            let q = extreme_dynamic(&p, &p, t).unwrap();
            for (a, b) in q.iter().zip(&point) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert!(extreme_dynamic(&p, &[0.3, 0.0, 0.0], 0).is_err());
    }

    fn small_structure() -> FactoredStructure {
        FactoredStructure {
            spec: FactorSpec::new(vec![2, 3], vec![2]).unwrap(),
            transition_scopes: vec![
                ScopeSet::new(vec![0, 2], 3).unwrap(),
                ScopeSet::new(vec![0, 1, 2], 3).unwrap(),
            ],
            reward_scopes: vec![ScopeSet::new(vec![1], 3).unwrap()],
            reward_max: vec![1.0],
        }
    }

    #[test]
    fn structured_solve_matches_flattened_extended() {
        let mut stats = VisitStatistics::new(small_structure());
        stats.set_transition_counts(0, 0, &[3, 1]).unwrap();
        stats.set_transition_counts(0, 3, &[1, 6]).unwrap();
        stats.set_transition_counts(1, 4, &[2, 2, 1]).unwrap();
        stats.set_transition_counts(1, 7, &[0, 5, 9]).unwrap();
        stats.set_reward_counts(0, 1, 4, 2.0);
        stats.set_time(30);
        let model = empirical_model(&stats);
        let params = WidthParams::shared(0.1, 30, 0.05);
        let ext = build_extended(&model, &WidthTables::compute(&stats, &params)).unwrap();
        assert!(ext.claim1().holds());

        let opts = RviOptions::with_tol(1e-11);
        let structured = ext.solve(&opts, None).unwrap();
        let flat = relative_value_iteration(&ext.flatten().unwrap(), &opts, None).unwrap();
        assert!((structured.report.gain() - flat.gain()).abs() < 1e-9);
        for (a, b) in structured.report.bias().iter().zip(flat.bias()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(map_policy(&structured.ext_policy, 2), structured.report.policy);
    }

    #[test]
    fn zero_widths_replicate_estimates() {
        let stats = VisitStatistics::new(small_structure());
        let model = empirical_model(&stats);
        let ext = build_extended(&model, &WidthTables::zeros(&model, WidthParams::default())).unwrap();
        for s in 0..6 {
            for t in 0..6 {
                assert_eq!(ext.rows(s, 1, t), ext.rows(s, 1, 0));
            }
        }
    }

    #[test]
    fn policy_projection() {
        assert_eq!(map_policy(&[0, 5, 7, 2], 3), vec![0, 2, 1, 2]);
        assert_eq!(map_policy(&[4; 3], 2), vec![0; 3]);
    }

    #[test]
    fn deviation_bound_on_equal_rows_is_tight_zero() {
        let p = vec![vec![0.3, 0.7], vec![0.2, 0.2, 0.6]];
        let h: Vec<f64> = (0..6).map(|k| (k * k) as f64).collect();
        let d = factored_deviation_bound(&p, &p, &h, &[2, 3]).unwrap();
        assert_eq!((d.lhs, d.rhs, d.ok), (0.0, 0.0, true));
        assert!(factored_deviation_bound(&p, &p, &h, &[3, 2]).is_err());
    }
}
