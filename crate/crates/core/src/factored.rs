//! Factored MDP representation.
//!
//! A state-action pair is a tuple of `n` components: the `m` state factors
//! come first, followed by the action components. Transition factor `i`
//! gives the law of next-state factor `i` conditioned on the components in
//! its scope; reward factor `i` gives a bounded reward conditioned on its
//! own scope. Flat indices are mixed-radix with the lowest component index
//! least significant, both for whole states/actions and for scoped keys.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tabular::TabularMdp;

/// Default cap on the number of transition entries `S * A * S` a flattening may create.
pub const DEFAULT_FLATTEN_CAP: u128 = 1 << 20;

/// Tolerance used when checking that probability rows sum to one.
pub const PROB_TOL: f64 = 1e-9;

/// Shape of the factored state-action space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorSpec {
    state_factor_sizes: Vec<usize>,
    component_sizes: Vec<usize>,
    action_component_indices: Vec<usize>,
}

impl FactorSpec {
    /// Builds a spec from state factor sizes and action component sizes.
    pub fn new(state_sizes: Vec<usize>, action_sizes: Vec<usize>) -> Result<Self> {
        let m = state_sizes.len();
        let mut component_sizes = state_sizes.clone();
        component_sizes.extend_from_slice(&action_sizes);
        let action_component_indices = (m..m + action_sizes.len()).collect();
        Self::from_parts(state_sizes, component_sizes, action_component_indices)
    }

    pub fn from_parts(
        state_factor_sizes: Vec<usize>,
        component_sizes: Vec<usize>,
        action_component_indices: Vec<usize>,
    ) -> Result<Self> {
        let spec = FactorSpec {
            state_factor_sizes,
            component_sizes,
            action_component_indices,
        };
        match spec.problems().into_iter().next() {
            Some(p) => Err(Error::Validation(p)),
            None => Ok(spec),
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let m = self.state_factor_sizes.len();
        let n = self.component_sizes.len();
        if m == 0 {
            out.push("at least one state factor is required".to_string());
        }
        if n < m {
            out.push(format!("{n} components cannot hold {m} state factors"));
        }
        if let Some(i) = self.component_sizes.iter().position(|&s| s == 0) {
            out.push(format!("component {i} has size 0"));
        }
        if n >= m && self.component_sizes[..m] != self.state_factor_sizes[..] {
            out.push("state factor sizes must equal the first m component sizes".to_string());
        }
        let expected: Vec<usize> = (m..n).collect();
        if self.action_component_indices != expected {
            out.push(format!(
                "action components must be the trailing components {expected:?}, got {:?}",
                self.action_component_indices
            ));
        }
        out
    }

    /// Number of state factors `m`.
    pub fn num_state_factors(&self) -> usize {
        self.state_factor_sizes.len()
    }

    /// Number of state-action components `n`.
    pub fn num_components(&self) -> usize {
        self.component_sizes.len()
    }

    pub fn state_factor_sizes(&self) -> &[usize] {
        &self.state_factor_sizes
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.component_sizes
    }

    pub fn action_component_indices(&self) -> &[usize] {
        &self.action_component_indices
    }

    pub fn action_sizes(&self) -> &[usize] {
        &self.component_sizes[self.num_state_factors()..]
    }

    pub fn num_states(&self) -> usize {
        self.state_factor_sizes.iter().product()
    }

    pub fn num_actions(&self) -> usize {
        self.action_sizes().iter().product()
    }

    /// Largest state factor size `W`.
    pub fn max_factor_size(&self) -> usize {
        self.state_factor_sizes.iter().copied().max().unwrap_or(1)
    }

    pub fn state_tuple(&self, flat: usize) -> Vec<usize> {
        decode_mixed(flat, &self.state_factor_sizes)
    }

    pub fn state_index(&self, tuple: &[usize]) -> usize {
        encode_mixed(tuple, &self.state_factor_sizes)
    }

    pub fn action_tuple(&self, flat: usize) -> Vec<usize> {
        decode_mixed(flat, self.action_sizes())
    }

    pub fn action_index(&self, tuple: &[usize]) -> usize {
        encode_mixed(tuple, self.action_sizes())
    }

    /// Component tuple `x = (s, a)` for flat state and action indices.
    pub fn joint(&self, state: usize, action: usize) -> Vec<usize> {
        let mut x = self.state_tuple(state);
        x.extend(self.action_tuple(action));
        x
    }

    /// Checks that a component tuple lies in `X`.
    pub fn check_tuple(&self, x: &[usize]) -> Result<()> {
        check_in_range(x, &self.component_sizes, "state-action tuple")
    }

    pub fn check_state(&self, s: &[usize]) -> Result<()> {
        check_in_range(s, &self.state_factor_sizes, "state tuple")
    }
}

fn check_in_range(x: &[usize], sizes: &[usize], what: &str) -> Result<()> {
    if x.len() != sizes.len() {
        return Err(Error::validation(format!(
            "{what} has {} components, expected {}",
            x.len(),
            sizes.len()
        )));
    }
    if let Some(i) = x.iter().zip(sizes).position(|(v, s)| v >= s) {
        return Err(Error::validation(format!(
            "{what} component {i} = {} out of range 0..{}",
            x[i], sizes[i]
        )));
    }
    Ok(())
}

/// Mixed-radix decode, first coordinate least significant.
pub fn decode_mixed(mut flat: usize, sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .map(|&s| {
            let v = flat % s;
            flat /= s;
            v
        })
        .collect()
}

/// Mixed-radix encode, first coordinate least significant.
pub fn encode_mixed(tuple: &[usize], sizes: &[usize]) -> usize {
    let mut idx = 0;
    for (&v, &s) in tuple.iter().zip(sizes).rev() {
        idx = idx * s + v;
    }
    idx
}

/// Sorted, duplicate-free set of component indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScopeSet(Vec<usize>);

impl ScopeSet {
    /// Builds a scope for a space with `n` components. Indices are sorted; duplicates are rejected.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation(format!("scope {indices:?} has duplicate indices")));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::validation(format!(
                "scope index {bad} out of range for {n} components"
            )));
        }
        Ok(ScopeSet(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.0.binary_search(&idx).is_ok()
    }

    /// Sizes of the scoped components.
    pub fn sizes(&self, component_sizes: &[usize]) -> Vec<usize> {
        self.0.iter().map(|&i| component_sizes[i]).collect()
    }

    /// `|X[Z]|`.
    pub fn cardinality(&self, component_sizes: &[usize]) -> usize {
        self.0.iter().map(|&i| component_sizes[i]).product()
    }

    /// `x[Z]`, the sub-tuple at the scope indices.
    pub fn project(&self, x: &[usize]) -> Vec<usize> {
        self.0.iter().map(|&i| x[i]).collect()
    }

    /// Flat key of `x[Z]` within `X[Z]`.
    pub fn key(&self, x: &[usize], component_sizes: &[usize]) -> usize {
        let mut idx = 0;
        for &i in self.0.iter().rev() {
            idx = idx * component_sizes[i] + x[i];
        }
        idx
    }

    /// Inverse of [`ScopeSet::key`], yielding the scoped tuple.
    pub fn decode_key(&self, key: usize, component_sizes: &[usize]) -> Vec<usize> {
        decode_mixed(key, &self.sizes(component_sizes))
    }
}

/// `x[Z]` with bounds checking.
pub fn scope_project(x: &[usize], scope: &ScopeSet) -> Result<Vec<usize>> {
    if let Some(&bad) = scope.indices().iter().find(|&&i| i >= x.len()) {
        return Err(Error::validation(format!(
            "scope index {bad} out of range for a tuple of {} components",
            x.len()
        )));
    }
    Ok(scope.project(x))
}

/// Formats a scoped tuple as a comma-joined table key.
pub fn format_key(scoped: &[usize]) -> String {
    scoped
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RewardKind {
    Deterministic,
    /// Takes the factor's maximum reward with probability `mean / max`, else 0.
    Bernoulli,
    /// Gaussian around the mean, truncated to `[0, max]`.
    TruncatedGaussian { sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardDist {
    pub mean: f64,
    pub kind: RewardKind,
}

impl RewardDist {
    pub fn deterministic(mean: f64) -> Self {
        RewardDist {
            mean,
            kind: RewardKind::Deterministic,
        }
    }

    /// Draws one reward in `[0, max]`.
    pub fn sample<R: Rng + ?Sized>(&self, max: f64, rng: &mut R) -> f64 {
        match self.kind {
            RewardKind::Deterministic => self.mean,
            RewardKind::Bernoulli => {
                if max <= 0.0 {
                    0.0
                } else if rng.gen::<f64>() < self.mean / max {
                    max
                } else {
                    0.0
                }
            }
            RewardKind::TruncatedGaussian { sigma } => {
                sample_truncated_normal(self.mean, sigma, 0.0, max, rng)
            }
        }
    }
}

/// Normal draw restricted to `[lo, hi]`: resamples up to 16 times, then clamps.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> f64 {
    if !(sigma > 0.0) {
        return mean.clamp(lo, hi);
    }
    let normal = Normal::new(mean, sigma).expect("sigma is positive and finite");
    let mut draw = mean;
    for _ in 0..16 {
        draw = normal.sample(rng);
        if (lo..=hi).contains(&draw) {
            return draw;
        }
    }
    draw.clamp(lo, hi)
}

/// One transition factor: `P_i(. | x[Z_i^P])` for every scoped key.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionFactor {
    pub scope: ScopeSet,
    /// Indexed by scoped key; each row is a distribution over the factor's values.
    pub table: Vec<Vec<f64>>,
}

/// One reward factor: `R_i(x[Z_i^R])`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardFactor {
    pub scope: ScopeSet,
    /// Upper end of this factor's reward support.
    pub max_reward: f64,
    pub table: Vec<RewardDist>,
}

/// The learner-visible structure of an FMDP: shapes and scopes, no parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredStructure {
    pub spec: FactorSpec,
    pub transition_scopes: Vec<ScopeSet>,
    pub reward_scopes: Vec<ScopeSet>,
    pub reward_max: Vec<f64>,
}

impl FactoredStructure {
    pub fn transition_scope_size(&self, i: usize) -> usize {
        self.transition_scopes[i].cardinality(self.spec.component_sizes())
    }

    pub fn reward_scope_size(&self, i: usize) -> usize {
        self.reward_scopes[i].cardinality(self.spec.component_sizes())
    }

    /// `L`: the largest scoped set over all transition and reward factors.
    pub fn max_scope_size(&self) -> usize {
        let sizes = self.spec.component_sizes();
        self.transition_scopes
            .iter()
            .chain(&self.reward_scopes)
            .map(|z| z.cardinality(sizes))
            .max()
            .unwrap_or(1)
    }

    pub fn transition_key(&self, i: usize, x: &[usize]) -> usize {
        self.transition_scopes[i].key(x, self.spec.component_sizes())
    }

    pub fn reward_key(&self, i: usize, x: &[usize]) -> usize {
        self.reward_scopes[i].key(x, self.spec.component_sizes())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Transition,
    Reward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationClass {
    /// Shapes, scopes, or non-stochastic rows; the model cannot be used.
    Structure,
    /// Total reward bound; the model is usable but outside the `[0, 1]` reward assumption.
    RewardBound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub class: ViolationClass,
    pub factor: Option<(FactorKind, usize)>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.factor {
            Some((FactorKind::Transition, i)) => write!(f, "transition factor {i}")?,
            Some((FactorKind::Reward, i)) => write!(f, "reward factor {i}")?,
            None => write!(f, "spec")?,
        }
        if let Some(key) = &self.key {
            write!(f, " key \"{key}\"")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_structural(&self) -> bool {
        self.violations
            .iter()
            .any(|v| v.class == ViolationClass::Structure)
    }

    pub(crate) fn push(
        &mut self,
        class: ViolationClass,
        factor: Option<(FactorKind, usize)>,
        key: Option<String>,
        message: impl Into<String>,
    ) {
        self.violations.push(Violation {
            class,
            factor,
            key,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Result of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub rewards: Vec<f64>,
    pub total: f64,
    pub next_state: Vec<usize>,
}

/// A fully specified factored MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredMdp {
    spec: FactorSpec,
    transitions: Vec<TransitionFactor>,
    rewards: Vec<RewardFactor>,
}

impl FactoredMdp {
    /// Builds an FMDP, rejecting structural violations. Reward-bound
    /// violations are reported by [`FactoredMdp::validate`] only.
    pub fn new(
        spec: FactorSpec,
        transitions: Vec<TransitionFactor>,
        rewards: Vec<RewardFactor>,
    ) -> Result<Self> {
        let mdp = FactoredMdp {
            spec,
            transitions,
            rewards,
        };
        let report = mdp.validate();
        if report.has_structural() {
            let first = report
                .violations
                .iter()
                .find(|v| v.class == ViolationClass::Structure)
                .expect("has_structural");
            return Err(Error::Validation(first.to_string()));
        }
        Ok(mdp)
    }

    pub fn spec(&self) -> &FactorSpec {
        &self.spec
    }

    pub fn transitions(&self) -> &[TransitionFactor] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[RewardFactor] {
        &self.rewards
    }

    pub fn num_states(&self) -> usize {
        self.spec.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.spec.num_actions()
    }

    pub fn structure(&self) -> FactoredStructure {
        FactoredStructure {
            spec: self.spec.clone(),
            transition_scopes: self.transitions.iter().map(|t| t.scope.clone()).collect(),
            reward_scopes: self.rewards.iter().map(|r| r.scope.clone()).collect(),
            reward_max: self.rewards.iter().map(|r| r.max_reward).collect(),
        }
    }

    /// Reports every invariant violation.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for p in self.spec.problems() {
            report.push(ViolationClass::Structure, None, None, p);
        }
        if report.has_structural() {
            return report;
        }
        let sizes = self.spec.component_sizes();
        let n = sizes.len();
        let m = self.spec.num_state_factors();
        if self.transitions.len() != m {
            report.push(
                ViolationClass::Structure,
                None,
                None,
                format!("{} transition factors for {m} state factors", self.transitions.len()),
            );
        }
        for (i, tf) in self.transitions.iter().enumerate() {
            let tag = Some((FactorKind::Transition, i));
            if let Some(&bad) = tf.scope.indices().iter().find(|&&j| j >= n) {
                report.push(
                    ViolationClass::Structure,
                    tag,
                    None,
                    format!("scope index {bad} out of range for {n} components"),
                );
                continue;
            }
            let card = tf.scope.cardinality(sizes);
            if tf.table.len() != card {
                report.push(
                    ViolationClass::Structure,
                    tag,
                    None,
                    format!("table has {} rows, scope needs {card}", tf.table.len()),
                );
                continue;
            }
            let width = self.spec.state_factor_sizes().get(i).copied().unwrap_or(0);
            for (key, row) in tf.table.iter().enumerate() {
                let key_str = || Some(format_key(&tf.scope.decode_key(key, sizes)));
                if row.len() != width {
                    report.push(
                        ViolationClass::Structure,
                        tag,
                        key_str(),
                        format!("row has {} entries, factor has {width} values", row.len()),
                    );
                    continue;
                }
                if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    report.push(
                        ViolationClass::Structure,
                        tag,
                        key_str(),
                        "row has a negative or non-finite probability",
                    );
                    continue;
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    report.push(
                        ViolationClass::Structure,
                        tag,
                        key_str(),
                        format!("row sums to {sum}"),
                    );
                }
            }
        }
        let mut max_total = 0.0;
        for (i, rf) in self.rewards.iter().enumerate() {
            let tag = Some((FactorKind::Reward, i));
            if let Some(&bad) = rf.scope.indices().iter().find(|&&j| j >= n) {
                report.push(
                    ViolationClass::Structure,
                    tag,
                    None,
                    format!("scope index {bad} out of range for {n} components"),
                );
                continue;
            }
            if !(rf.max_reward >= 0.0) || !rf.max_reward.is_finite() {
                report.push(
                    ViolationClass::Structure,
                    tag,
                    None,
                    format!("maximum reward {} is not a nonnegative number", rf.max_reward),
                );
                continue;
            }
            max_total += rf.max_reward;
            let card = rf.scope.cardinality(sizes);
            if rf.table.len() != card {
                report.push(
                    ViolationClass::Structure,
                    tag,
                    None,
                    format!("table has {} entries, scope needs {card}", rf.table.len()),
                );
                continue;
            }
            for (key, dist) in rf.table.iter().enumerate() {
                let key_str = || Some(format_key(&rf.scope.decode_key(key, sizes)));
                if !(dist.mean >= 0.0 && dist.mean <= rf.max_reward + PROB_TOL) {
                    report.push(
                        ViolationClass::Structure,
                        tag,
                        key_str(),
                        format!("mean {} outside [0, {}]", dist.mean, rf.max_reward),
                    );
                }
                if let RewardKind::TruncatedGaussian { sigma } = dist.kind {
                    if !(sigma >= 0.0) || !sigma.is_finite() {
                        report.push(
                            ViolationClass::Structure,
                            tag,
                            key_str(),
                            format!("gaussian sigma {sigma} must be nonnegative"),
                        );
                    }
                }
            }
        }
        if max_total > 1.0 + PROB_TOL {
            report.push(
                ViolationClass::RewardBound,
                None,
                None,
                format!("sum of per-factor maximum rewards is {max_total}, exceeds 1"),
            );
        }
        report
    }

    /// Product of per-factor next-state probabilities.
    pub fn joint_transition_prob(&self, x: &[usize], next: &[usize]) -> Result<f64> {
        self.spec.check_tuple(x)?;
        self.spec.check_state(next)?;
        Ok(self.joint_prob_unchecked(x, next))
    }

    fn joint_prob_unchecked(&self, x: &[usize], next: &[usize]) -> f64 {
        let sizes = self.spec.component_sizes();
        self.transitions
            .iter()
            .zip(next)
            .map(|(tf, &v)| tf.table[tf.scope.key(x, sizes)][v])
            .product()
    }

    /// Expected total reward `sum_i R_i(x[Z_i^R])`.
    pub fn mean_reward(&self, x: &[usize]) -> f64 {
        let sizes = self.spec.component_sizes();
        self.rewards
            .iter()
            .map(|rf| rf.table[rf.scope.key(x, sizes)].mean)
            .sum()
    }

    /// Per-factor next-state distributions for the pair `x`.
    pub fn factor_rows(&self, x: &[usize]) -> Vec<&[f64]> {
        let sizes = self.spec.component_sizes();
        self.transitions
            .iter()
            .map(|tf| tf.table[tf.scope.key(x, sizes)].as_slice())
            .collect()
    }

    /// Flattens to an `S x A` tabular model with the default cap.
    pub fn flatten(&self) -> Result<TabularMdp> {
        self.flatten_with_cap(DEFAULT_FLATTEN_CAP)
    }

    pub fn flatten_with_cap(&self, cap: u128) -> Result<TabularMdp> {
        let ns = self.num_states();
        let na = self.num_actions();
        let needed = (ns as u128) * (na as u128) * (ns as u128);
        if needed > cap {
            return Err(Error::Size {
                what: "flattened transition tensor",
                needed,
                cap,
            });
        }
        let mut transition = Vec::with_capacity(ns * na * ns);
        let mut reward = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                let x = self.spec.joint(s, a);
                let rows = self.factor_rows(&x);
                transition.extend(product_distribution(&rows));
                reward.push(self.mean_reward(&x));
            }
        }
        TabularMdp::new(ns, na, transition, reward)
    }

    /// Samples rewards and the next state for `(state, action)`.
    pub fn sample_step<R: Rng + ?Sized>(&self, state: &[usize], action: &[usize], rng: &mut R) -> Step {
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        let sizes = self.spec.component_sizes();
        let next_state = self
            .transitions
            .iter()
            .map(|tf| sample_index(&tf.table[tf.scope.key(&x, sizes)], rng))
            .collect();
        let rewards: Vec<f64> = self
            .rewards
            .iter()
            .map(|rf| rf.table[rf.scope.key(&x, sizes)].sample(rf.max_reward, rng))
            .collect();
        let total = rewards.iter().sum();
        Step {
            rewards,
            total,
            next_state,
        }
    }
}

/// Validates parts without constructing a checked model.
pub fn report_for_parts(
    spec: FactorSpec,
    transitions: Vec<TransitionFactor>,
    rewards: Vec<RewardFactor>,
) -> ValidationReport {
    FactoredMdp {
        spec,
        transitions,
        rewards,
    }
    .validate()
}

/// Joint law of independent factors, flat index with factor 0 least significant.
pub fn product_distribution(rows: &[&[f64]]) -> Vec<f64> {
    let mut dist = vec![1.0];
    for row in rows {
        let mut next = Vec::with_capacity(dist.len() * row.len());
        for &p in row.iter() {
            next.extend(dist.iter().map(|&q| p * q));
        }
        dist = next;
    }
    dist
}

/// Inverse-CDF draw from a discrete distribution.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the cumulative sum: take the last positive entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
