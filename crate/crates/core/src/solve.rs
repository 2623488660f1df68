//! Exact average-reward planning and connectivity measures on flat models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tabular::TabularMdp;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;
pub const DEFAULT_DAMPING: f64 = 0.5;
pub const DEFAULT_DIAMETER_CAP: f64 = 1e6;
/// Gains of recurrent classes may differ by at most this much for a policy to count as unichain.
pub const MULTICHAIN_TOL: f64 = 1e-6;

/// Anything relative value iteration can back up.
///
/// `expect` returns the best attainable `E[h(s')]` for the pair; models with
/// internal choices (the extended MDP's target state) maximize over them.
pub trait AverageRewardModel {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn reward(&self, s: usize, a: usize) -> f64;
    fn expect(&self, s: usize, a: usize, h: &[f64]) -> f64;
}

impl AverageRewardModel for TabularMdp {
    fn num_states(&self) -> usize {
        TabularMdp::num_states(self)
    }

    fn num_actions(&self) -> usize {
        TabularMdp::num_actions(self)
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        TabularMdp::reward(self, s, a)
    }

    fn expect(&self, s: usize, a: usize, h: &[f64]) -> f64 {
        TabularMdp::expect(self, s, a, h)
    }
}

/// Gain `lambda`, bias `h` (with `h[0] = 0`), and the final Bellman residual.
#[derive(Clone, Debug, PartialEq)]
pub struct GainBias {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub residual: f64,
}

impl GainBias {
    pub fn span(&self) -> f64 {
        span(&self.bias)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub gain_bias: GainBias,
    pub policy: Vec<usize>,
    pub iterations: usize,
}

impl SolveReport {
    pub fn gain(&self) -> f64 {
        self.gain_bias.gain
    }

    pub fn bias(&self) -> &[f64] {
        &self.gain_bias.bias
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RviOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Weight `tau` of the self-loop in `P <- tau I + (1 - tau) P`.
    pub damping: f64,
    /// Stop once the per-state gain estimates settle instead of requiring a constant gain.
    pub multichain: bool,
}

impl Default for RviOptions {
    fn default() -> Self {
        RviOptions {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            damping: DEFAULT_DAMPING,
            multichain: false,
        }
    }
}

impl RviOptions {
    pub fn with_tol(tol: f64) -> Self {
        RviOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Relative value iteration on the aperiodicity-transformed model.
///
/// The transform keeps the gain and scales the bias by `1 / (1 - tau)`; the
/// returned bias is on the original scale. `warm_bias` (original scale)
/// seeds the iteration.
pub fn relative_value_iteration<M: AverageRewardModel + ?Sized>(
    model: &M,
    opts: &RviOptions,
    warm_bias: Option<&[f64]>,
) -> Result<SolveReport> {
    let n = model.num_states();
    let na = model.num_actions();
    if !(opts.tol > 0.0) {
        return Err(Error::validation("tolerance must be positive"));
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::validation("damping must lie in [0, 1)"));
    }
    let tau = opts.damping;
    let keep = 1.0 - tau;
    let mut v: Vec<f64> = match warm_bias {
        Some(h) if h.len() == n && h.iter().all(|x| x.is_finite()) => {
            h.iter().map(|x| (x - h[0]) / keep).collect()
        }
        _ => vec![0.0; n],
    };
    let mut next = vec![0.0; n];
    let mut policy = vec![0usize; n];
    let mut prev_diff = vec![f64::NAN; n];
    let mut diff = vec![0.0; n];
    let mut residual = f64::INFINITY;

    for iter in 1..=opts.max_iters {
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for a in 0..na {
                let q = model.reward(s, a) + keep * model.expect(s, a, &v);
                if q > best {
                    best = q;
                    arg = a;
                }
            }
            next[s] = best + tau * v[s];
            policy[s] = arg;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..n {
            diff[s] = next[s] - v[s];
            lo = lo.min(diff[s]);
            hi = hi.max(diff[s]);
        }
        let converged = if opts.multichain {
            let change = diff
                .iter()
                .zip(&prev_diff)
                .map(|(d, p)| (d - p).abs())
                .fold(0.0, f64::max);
            residual = change;
            change <= opts.tol
        } else {
            residual = (hi - lo) / 2.0;
            hi - lo <= opts.tol
        };
        if !residual.is_finite() && !opts.multichain {
            return Err(Error::Convergence {
                iterations: iter,
                residual,
            });
        }
        if converged {
            let gain = if opts.multichain { hi } else { (hi + lo) / 2.0 };
            let bias = v.iter().map(|x| keep * (x - v[0])).collect();
            return Ok(SolveReport {
                gain_bias: GainBias {
                    gain,
                    bias,
                    residual,
                },
                policy,
                iterations: iter,
            });
        }
        std::mem::swap(&mut prev_diff, &mut diff);
        let base = next[0];
        for s in 0..n {
            v[s] = next[s] - base;
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iters,
        residual,
    })
}

/// Optimal gain, bias, and greedy policy (lowest action index on ties).
pub fn solve_average_reward(m: &TabularMdp, tol: f64, max_iters: usize) -> Result<SolveReport> {
    let opts = RviOptions {
        tol,
        max_iters,
        ..Default::default()
    };
    relative_value_iteration(m, &opts, None)
}

/// Bellman residual `max_s |lambda + h(s) - R(s, pi(s)) - P(pi) h (s)|`.
pub fn policy_residual(m: &TabularMdp, policy: &[usize], gain: f64, h: &[f64]) -> f64 {
    policy
        .iter()
        .enumerate()
        .map(|(s, &a)| (gain + h[s] - m.reward(s, a) - m.expect(s, a, h)).abs())
        .fold(0.0, f64::max)
}

/// Strongly connected components with no outgoing edge, for the chain `p` (row-major, `n x n`).
pub fn closed_classes(p: &[f64], n: usize) -> Vec<Vec<usize>> {
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|s| (0..n).filter(|&t| p[s * n + t] > 0.0).collect())
        .collect();
    let comp = strongly_connected(&succ);
    let ncomp = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut closed = vec![true; ncomp];
    for s in 0..n {
        if succ[s].iter().any(|&t| comp[t] != comp[s]) {
            closed[comp[s]] = false;
        }
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for s in 0..n {
        if closed[comp[s]] {
            classes[comp[s]].push(s);
        }
    }
    let mut out: Vec<Vec<usize>> = classes.into_iter().filter(|c| !c.is_empty()).collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Kosaraju labelling; returns a component id per vertex.
fn strongly_connected(succ: &[Vec<usize>]) -> Vec<usize> {
    let n = succ.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < succ[v].len() {
                let w = succ[v][*next];
                *next += 1;
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut pred = vec![Vec::new(); n];
    for (v, ws) in succ.iter().enumerate() {
        for &w in ws {
            pred[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next_id = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = next_id;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &w in &pred[v] {
                if comp[w] == usize::MAX {
                    comp[w] = next_id;
                    stack.push(w);
                }
            }
        }
        next_id += 1;
    }
    comp
}

/// Stationary distribution of the chain restricted to a closed class.
fn class_stationary(p: &[f64], n: usize, class: &[usize]) -> Result<Vec<f64>> {
    let k = class.len();
    // mu (I - P_C) = 0 with the last equation replaced by sum(mu) = 1.
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (r, &t) in class.iter().enumerate() {
        for (c, &s) in class.iter().enumerate() {
            let delta = if s == t { 1.0 } else { 0.0 };
            a[(r, c)] = delta - p[s * n + t];
        }
    }
    for c in 0..k {
        a[(k - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    a.lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Evaluation("singular stationary system".into()))
}

/// Gain and bias of a fixed deterministic policy.
///
/// Fails when recurrent classes disagree on the gain by more than
/// [`MULTICHAIN_TOL`], or when the solved pair misses the evaluation
/// equation by more than `tol * (1 + sp(h))`.
pub fn policy_gain_bias(m: &TabularMdp, policy: &[usize], tol: f64) -> Result<GainBias> {
    let n = m.num_states();
    if policy.len() != n || policy.iter().any(|&a| a >= m.num_actions()) {
        return Err(Error::validation("policy does not match the MDP"));
    }
    let (p, r) = m.policy_chain(policy);
    let classes = closed_classes(&p, n);
    let mut gains = Vec::with_capacity(classes.len());
    let mut stationaries = Vec::with_capacity(classes.len());
    for class in &classes {
        let mu = class_stationary(&p, n, class)?;
        gains.push(class.iter().zip(&mu).map(|(&s, w)| w * r[s]).sum::<f64>());
        stationaries.push(mu);
    }
    let (lo, hi) = gains
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
    if hi - lo > MULTICHAIN_TOL {
        return Err(Error::Evaluation(format!(
            "gain depends on the start state: recurrent classes have gains in [{lo}, {hi}]"
        )));
    }
    let gain = gains.iter().sum::<f64>() / gains.len() as f64;

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in 0..n {
        for t in 0..n {
            a[(s, t)] = if s == t { 1.0 } else { 0.0 } - p[s * n + t];
        }
        b[s] = r[s] - gain;
    }
    // One evaluation equation per closed class is redundant; pin mu_j . h = 0 instead.
    for (class, mu) in classes.iter().zip(&stationaries) {
        let rep = class[0];
        for t in 0..n {
            a[(rep, t)] = 0.0;
        }
        for (&t, w) in class.iter().zip(mu) {
            a[(rep, t)] = *w;
        }
        b[rep] = 0.0;
    }
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Evaluation("singular bias system".into()))?;
    let bias: Vec<f64> = sol.iter().map(|x| x - sol[0]).collect();
    let residual = policy_residual(m, policy, gain, &bias);
    if residual > tol.max(1e-12) * (1.0 + span(&bias)) + MULTICHAIN_TOL {
        return Err(Error::Evaluation(format!(
            "bias solve residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(GainBias {
        gain,
        bias,
        residual,
    })
}

/// Enumerates every deterministic stationary policy (at most `10^6`).
///
/// Policies whose gain depends on the start state are skipped. Among
/// maximal-gain policies the one with the largest bias span wins.
pub fn brute_force_optimal(m: &TabularMdp) -> Result<SolveReport> {
    const CAP: f64 = 1e6;
    let n = m.num_states();
    let na = m.num_actions();
    let count = (na as f64).powi(n as i32);
    if count > CAP {
        return Err(Error::Size {
            what: "policy enumeration",
            needed: count as u128,
            cap: CAP as u128,
        });
    }
    let total = count as usize;
    let mut policy = vec![0usize; n];
    let mut best: Option<(GainBias, Vec<usize>)> = None;
    let mut evaluated = 0;
    for _ in 0..total {
        if let Ok(gb) = policy_gain_bias(m, &policy, 1e-9) {
            evaluated += 1;
            let better = match &best {
                None => true,
                Some((b, _)) => {
                    gb.gain > b.gain + 1e-9
                        || ((gb.gain - b.gain).abs() <= 1e-9 && gb.span() > b.span() + 1e-12)
                }
            };
            if better {
                best = Some((gb, policy.clone()));
            }
        }
        for slot in policy.iter_mut() {
            *slot += 1;
            if *slot < na {
                break;
            }
            *slot = 0;
        }
    }
    let (gain_bias, policy) =
        best.ok_or_else(|| Error::Evaluation("no policy has a state-independent gain".into()))?;
    Ok(SolveReport {
        gain_bias,
        policy,
        iterations: evaluated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Diameter {
    Finite(f64),
    Infinite,
}

impl Diameter {
    pub fn finite(self) -> Option<f64> {
        match self {
            Diameter::Finite(d) => Some(d),
            Diameter::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Diameter::Infinite)
    }
}

impl std::fmt::Display for Diameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diameter::Finite(d) => write!(f, "{d}"),
            Diameter::Infinite => write!(f, "infinite"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiameterResult {
    pub value: Diameter,
    pub cap_used: f64,
}

/// States from which `target` can be reached with probability one.
fn almost_sure_reach(m: &TabularMdp, target: usize) -> Vec<bool> {
    let n = m.num_states();
    let na = m.num_actions();
    let mut inside = vec![true; n];
    loop {
        let allowed = |s: usize, a: usize, set: &[bool]| {
            m.row(s, a).iter().zip(set).all(|(&p, &ok)| p == 0.0 || ok)
        };
        let mut reach = vec![false; n];
        reach[target] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if reach[s] || !inside[s] {
                    continue;
                }
                let hit = (0..na).any(|a| {
                    allowed(s, a, &inside)
                        && m.row(s, a).iter().zip(&reach).any(|(&p, &r)| p > 0.0 && r)
                });
                if hit {
                    reach[s] = true;
                    changed = true;
                }
            }
        }
        if reach == inside {
            return inside;
        }
        inside = reach;
    }
}

/// Minimal expected hitting times of `target`, or `None` when some state cannot reach it surely.
///
/// Starts from a proper policy built from the reachability layers and runs
/// policy iteration, solving each policy's absorbing-chain system exactly.
pub fn min_hitting_times(m: &TabularMdp, target: usize) -> Option<Vec<f64>> {
    let n = m.num_states();
    let na = m.num_actions();
    if !almost_sure_reach(m, target).iter().all(|&x| x) {
        return None;
    }
    // Attractor layering gives a proper initial policy.
    let mut policy = vec![0usize; n];
    let mut attained = vec![false; n];
    attained[target] = true;
    let mut progress = true;
    while progress {
        progress = false;
        let snapshot = attained.clone();
        for s in 0..n {
            if snapshot[s] {
                continue;
            }
            if let Some(a) = (0..na).find(|&a| {
                m.row(s, a)
                    .iter()
                    .zip(&snapshot)
                    .any(|(&p, &done)| p > 0.0 && done)
            }) {
                policy[s] = a;
                attained[s] = true;
                progress = true;
            }
        }
    }

    let others: Vec<usize> = (0..n).filter(|&s| s != target).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &s) in others.iter().enumerate() {
        pos[s] = k;
    }
    let k = others.len();
    let mut times = vec![0.0; n];
    for _ in 0..(10 * n + 10) {
        let mut a_mat = DMatrix::<f64>::identity(k, k);
        for (r, &s) in others.iter().enumerate() {
            for (t, &p) in m.row(s, policy[s]).iter().enumerate() {
                if t != target && p > 0.0 {
                    a_mat[(r, pos[t])] -= p;
                }
            }
        }
        let sol = a_mat.lu().solve(&DVector::<f64>::from_element(k, 1.0))?;
        for (r, &s) in others.iter().enumerate() {
            times[s] = sol[r];
        }
        let mut changed = false;
        for &s in &others {
            let current = 1.0 + m.expect(s, policy[s], &times);
            let mut best = current;
            let mut arg = policy[s];
            for a in 0..na {
                let q = 1.0 + m.expect(s, a, &times);
                if q < best - 1e-12 * (1.0 + best.abs()) {
                    best = q;
                    arg = a;
                }
            }
            if arg != policy[s] {
                policy[s] = arg;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Some(times)
}

/// `max_{s != s'} min_pi E[T(s' | s)]`, or `Infinite` when a pair is unreachable or exceeds `cap`.
pub fn diameter(m: &TabularMdp, cap: f64) -> DiameterResult {
    let n = m.num_states();
    let mut worst: f64 = 0.0;
    for target in 0..n {
        match min_hitting_times(m, target) {
            None => {
                return DiameterResult {
                    value: Diameter::Infinite,
                    cap_used: cap,
                }
            }
            Some(times) => {
                let mx = times.iter().copied().fold(0.0, f64::max);
                if !(mx <= cap) {
                    return DiameterResult {
                        value: Diameter::Infinite,
                        cap_used: cap,
                    };
                }
                worst = worst.max(mx);
            }
        }
    }
    DiameterResult {
        value: Diameter::Finite(worst),
        cap_used: cap,
    }
}

/// `max(h) - min(h)`; zero for an empty vector.
pub fn span(h: &[f64]) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let (lo, hi) = h
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanProfile {
    pub span: f64,
    pub factored_spans: Vec<f64>,
    /// `Q(h)`, the sum of the factored spans.
    pub q: f64,
}

/// Per-factor worst-case coordinate spans of `h` over a factored state space.
pub fn factored_span(h: &[f64], state_factor_sizes: &[usize]) -> Result<SpanProfile> {
    let total: usize = state_factor_sizes.iter().product();
    if h.len() != total || state_factor_sizes.is_empty() {
        return Err(Error::validation(format!(
            "vector of length {} does not match factor sizes {state_factor_sizes:?}",
            h.len()
        )));
    }
    let mut factored_spans = Vec::with_capacity(state_factor_sizes.len());
    let mut stride = 1;
    for &size in state_factor_sizes {
        let mut worst: f64 = 0.0;
        for base in 0..total {
            if (base / stride) % size != 0 {
                continue;
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in 0..size {
                let x = h[base + v * stride];
                lo = lo.min(x);
                hi = hi.max(x);
            }
            worst = worst.max(hi - lo);
        }
        factored_spans.push(worst);
        stride *= size;
    }
    let q = factored_spans.iter().sum();
    Ok(SpanProfile {
        span: span(h),
        factored_spans,
        q,
    })
}

/// `sp(h) <= Q(h) <= m sp(h)`, up to rounding.
pub fn check_span_bounds(profile: &SpanProfile, num_factors: usize) -> bool {
    let eps = 1e-12 * (1.0 + profile.q.abs());
    profile.span <= profile.q + eps && profile.q <= num_factors as f64 * profile.span + eps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle2() -> TabularMdp {
        TabularMdp::from_tables(
            &[vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            &[vec![1.0], vec![0.0]],
        )
        .unwrap()
    }

    #[test]
    fn single_state_fixed_point() {
        let m = TabularMdp::new(1, 1, vec![1.0], vec![0.7]).unwrap();
        let r = solve_average_reward(&m, 1e-10, 1000).unwrap();
        assert!((r.gain() - 0.7).abs() < 1e-12);
        assert_eq!(r.bias(), &[0.0]);
    }

    #[test]
    fn periodic_two_cycle() {
        // lambda + h0 = 1 + h1, lambda + h1 = h0 gives lambda = 1/2, h0 - h1 = 1/2.
        let r = solve_average_reward(&cycle2(), 1e-10, 10_000).unwrap();
        assert!((r.gain() - 0.5).abs() < 1e-9);
        assert!((r.bias()[0] - 0.0).abs() < 1e-12);
        assert!((r.bias()[1] + 0.5).abs() < 1e-9);
        assert!(r.gain_bias.residual <= 1e-10);
    }

    #[test]
    fn non_convergence_is_reported() {
        let m = TabularMdp::new(
            2,
            1,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0],
        )
        .unwrap();
        match solve_average_reward(&m, 1e-8, 50) {
            Err(Error::Convergence { iterations, residual }) => {
                assert_eq!(iterations, 50);
                assert!(residual > 0.4);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn policy_evaluation_two_state_chain() {
        // Stationary law of [[0.9, 0.1], [0.3, 0.7]] is (0.75, 0.25).
        let m = TabularMdp::new(
            2,
            1,
            vec![0.9, 0.1, 0.3, 0.7],
            vec![0.2, 1.0],
        )
        .unwrap();
        let gb = policy_gain_bias(&m, &[0, 0], 1e-9).unwrap();
        assert!((gb.gain - (0.75 * 0.2 + 0.25 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn multichain_policy_is_rejected_unless_gains_agree() {
        let m = TabularMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            policy_gain_bias(&m, &[0, 0], 1e-9),
            Err(Error::Evaluation(_))
        ));
        let flat = TabularMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![0.4, 0.4]).unwrap();
        let gb = policy_gain_bias(&flat, &[0, 0], 1e-9).unwrap();
        assert!((gb.gain - 0.4).abs() < 1e-12);
    }

    #[test]
    fn swap_has_unit_diameter() {
        let d = diameter(&cycle2(), DEFAULT_DIAMETER_CAP);
        assert_eq!(d.value, Diameter::Finite(1.0));
    }

    #[test]
    fn unreachable_pair_is_infinite() {
        let m = TabularMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert!(diameter(&m, DEFAULT_DIAMETER_CAP).value.is_infinite());
    }

    #[test]
    fn cap_turns_large_hitting_time_infinite() {
        // Leaving state 0 takes 1/p steps in expectation.
        let p = 1e-3;
        let m = TabularMdp::new(2, 1, vec![1.0 - p, p, 1.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(diameter(&m, 1e6).value.finite().map(|d| d.round()), Some(1000.0));
        assert!(diameter(&m, 999.0).value.is_infinite());
    }

    #[test]
    fn span_values() {
        assert_eq!(span(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(span(&[0.0, 1.0, 5.0]), 5.0);
    }

    #[test]
    fn factored_span_examples() {
        // h(s1, s2) = s1 + 2 s2 on a 2x2 grid, flat index s1 + 2 s2.
        let h = [0.0, 1.0, 2.0, 3.0];
        let p = factored_span(&h, &[2, 2]).unwrap();
        assert_eq!(p.factored_spans, vec![1.0, 2.0]);
        assert_eq!(p.q, 3.0);
        assert_eq!(p.span, 3.0);
        assert!(check_span_bounds(&p, 2));

        let p = factored_span(&[0.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
        assert_eq!((p.span, p.q), (1.0, 2.0));
        assert!(check_span_bounds(&p, 2));

        let p = factored_span(&[4.0; 6], &[2, 3]).unwrap();
        assert_eq!((p.span, p.q), (0.0, 0.0));

        assert!(factored_span(&[0.0; 5], &[2, 2]).is_err());
    }

    #[test]
    fn brute_force_single_action() {
        let r = brute_force_optimal(&cycle2()).unwrap();
        assert_eq!(r.policy, vec![0, 0]);
        assert!((r.gain() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closed_classes_found() {
        // 0 -> 1 <-> 2, 3 absorbing.
        let p = [
            0.0, 0.5, 0.0, 0.5, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ];
        assert_eq!(closed_classes(&p, 4), vec![vec![1, 2], vec![3]]);
    }
}
