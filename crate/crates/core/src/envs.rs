//! Benchmark environments: sysadmin networks, Cartesian products of tabular
//! MDPs, the two-circle product, and products of two-state hard instances.

use std::path::{Path, PathBuf};

use log::{info, log_enabled, Level};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factored::{
    FactorSpec, FactoredMdp, RewardDist, RewardFactor, ScopeSet, TransitionFactor, DEFAULT_FLATTEN_CAP,
};
use crate::format::load_mdp;
use crate::solve::{diameter, DEFAULT_DIAMETER_CAP};
use crate::tabular::TabularMdp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Circle,
    ThreeLeg,
}

fn default_alpha() -> f64 {
    0.1
}

fn default_reboot() -> f64 {
    0.95
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SysadminSpec {
    pub topology: Topology,
    pub size: usize,
    #[serde(default = "default_alpha")]
    pub alpha1: f64,
    #[serde(default = "default_alpha")]
    pub alpha2: f64,
    #[serde(default = "default_reboot")]
    pub reboot_success: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

impl SysadminSpec {
    pub fn new(topology: Topology, size: usize, noise_seed: u64) -> Self {
        SysadminSpec {
            topology,
            size,
            alpha1: default_alpha(),
            alpha2: default_alpha(),
            reboot_success: default_reboot(),
            noise_seed,
        }
    }

    pub fn circle(size: usize) -> Self {
        Self::new(Topology::Circle, size, 0)
    }

    pub fn three_leg(size: usize) -> Self {
        Self::new(Topology::ThreeLeg, size, 0)
    }

    fn validate(&self) -> Result<()> {
        let (name, min) = match self.topology {
            Topology::Circle => ("circle", 3),
            Topology::ThreeLeg => ("three-leg", 4),
        };
        if self.size < min {
            return Err(Error::Config(format!(
                "{name} network needs at least {min} machines, got {}",
                self.size
            )));
        }
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("reboot_success", self.reboot_success),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Machines whose failure affects machine `i`, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let m = self.size;
        match self.topology {
            Topology::Circle => vec![(i + m - 1) % m],
            Topology::ThreeLeg => {
                if i == 0 {
                    return Vec::new();
                }
                // Legs are consecutive runs of 1..m, sizes as equal as possible.
                let (base, extra) = ((m - 1) / 3, (m - 1) % 3);
                let mut start = 1;
                for leg in 0..3 {
                    let len = base + usize::from(leg < extra);
                    if i < start + len {
                        return vec![if i == start { 0 } else { i - 1 }];
                    }
                    start += len;
                }
                unreachable!("machine index below size")
            }
        }
    }

    /// Flat index of the all-working state.
    pub fn initial_state(&self) -> usize {
        (1usize << self.size) - 1
    }
}

/// Generates a sysadmin network. Machine value 1 means working; the single
/// action component picks a machine to reboot, and index `m` is no-op.
pub fn build_sysadmin(spec: &SysadminSpec) -> Result<FactoredMdp> {
    spec.validate()?;
    let m = spec.size;
    let fspec = FactorSpec::new(vec![2; m], vec![m + 1])?;
    let sizes = fspec.component_sizes().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let mut transitions = Vec::with_capacity(m);
    let mut rewards = Vec::with_capacity(m);
    for i in 0..m {
        let nbrs = spec.neighbors(i);
        let eps1: f64 = normal();
        let eps0: f64 = normal();
        let eta: Vec<(f64, f64)> = nbrs.iter().map(|_| (normal(), normal())).collect();

        let mut idx = vec![i, m];
        idx.extend(&nbrs);
        let scope = ScopeSet::new(idx, m + 1)?;
        let table = (0..scope.cardinality(&sizes))
            .map(|key| {
                let vals = scope.decode_key(key, &sizes);
                let value = |c: usize| vals[scope.indices().iter().position(|&j| j == c).expect("in scope")];
                if value(m) == i {
                    return vec![1.0 - spec.reboot_success, spec.reboot_success];
                }
                let failed: Vec<f64> = nbrs.iter().map(|&j| f64::from(u8::from(value(j) == 0))).collect();
                if value(i) == 1 {
                    let push: f64 = eta.iter().zip(&failed).map(|(e, f)| spec.alpha2 * e.0.abs() * f).sum();
                    let fail = (spec.alpha1 * eps1.abs() + push).min(1.0);
                    vec![fail, 1.0 - fail]
                } else {
                    let push: f64 = eta.iter().zip(&failed).map(|(e, f)| spec.alpha2 * e.1.abs() * f).sum();
                    let stay = (eps0.abs().max(0.5) + push).min(1.0);
                    vec![stay, 1.0 - stay]
                }
            })
            .collect();
        transitions.push(TransitionFactor { scope, table });

        let share = 1.0 / m as f64;
        rewards.push(RewardFactor {
            scope: ScopeSet::new(vec![i], m + 1)?,
            max_reward: share,
            table: vec![RewardDist::deterministic(0.0), RewardDist::deterministic(share)],
        });
    }
    let mdp = FactoredMdp::new(fspec, transitions, rewards)?;
    if m <= 7 && log_enabled!(Level::Info) {
        let d = diameter(&mdp.flatten()?, DEFAULT_DIAMETER_CAP);
        info!("sysadmin {:?} size {m}: diameter {}", spec.topology, d.value);
    }
    Ok(mdp)
}

/// Product of independent MDPs: one state factor and one action component per part.
///
/// With `renormalize` each part's rewards are divided by the number of parts.
pub fn cartesian_product(components: &[TabularMdp], renormalize: bool) -> Result<FactoredMdp> {
    if components.is_empty() {
        return Err(Error::validation("a product needs at least one component"));
    }
    let n = components.len();
    let needed = components
        .iter()
        .map(|c| c.num_states() as u128 * c.num_actions() as u128)
        .product::<u128>();
    if needed > DEFAULT_FLATTEN_CAP {
        return Err(Error::Size {
            what: "product state-action space",
            needed,
            cap: DEFAULT_FLATTEN_CAP,
        });
    }
    let spec = FactorSpec::new(
        components.iter().map(TabularMdp::num_states).collect(),
        components.iter().map(TabularMdp::num_actions).collect(),
    )?;
    let scale = if renormalize { 1.0 / n as f64 } else { 1.0 };
    let mut transitions = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    for (i, c) in components.iter().enumerate() {
        let scope = ScopeSet::new(vec![i, n + i], 2 * n)?;
        // Key layout: state digit first (least significant), then action.
        let pairs = || (0..c.num_actions()).flat_map(|a| (0..c.num_states()).map(move |s| (s, a)));
        transitions.push(TransitionFactor {
            scope: scope.clone(),
            table: pairs().map(|(s, a)| c.row(s, a).to_vec()).collect(),
        });
        let top = c.rewards().iter().copied().fold(1.0, f64::max);
        rewards.push(RewardFactor {
            scope,
            max_reward: top * scale,
            table: pairs()
                .map(|(s, a)| RewardDist::deterministic(c.reward(s, a) * scale))
                .collect(),
        });
    }
    FactoredMdp::new(spec, transitions, rewards)
}

/// A deterministic cycle with forward (action 0) and backward (action 1) moves, reward 1 at state 0.
pub fn circle_component(cycle_len: usize) -> Result<TabularMdp> {
    let n = cycle_len;
    let mut transition = vec![0.0; n * 2 * n];
    let mut reward = vec![0.0; n * 2];
    for s in 0..n {
        transition[(s * 2) * n + (s + 1) % n] = 1.0;
        transition[(s * 2 + 1) * n + (s + n - 1) % n] = 1.0;
    }
    reward[0] = 1.0;
    reward[1] = 1.0;
    TabularMdp::new(n, 2, transition, reward)
}

/// Product of identical circles. Every move flips the parity of each
/// coordinate, so the parity of the coordinate sum never changes.
pub fn build_product_circle(copies: usize, cycle_len: usize) -> Result<FactoredMdp> {
    if cycle_len < 4 || !cycle_len.is_multiple_of(2) {
        return Err(Error::Config(format!("cycle length must be even and at least 4, got {cycle_len}")));
    }
    if copies == 0 {
        return Err(Error::Config("at least one copy is required".into()));
    }
    let c = circle_component(cycle_len)?;
    cartesian_product(&vec![c; copies], true)
}

fn default_jao_actions() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JaoSpec {
    pub copies: usize,
    pub delta: f64,
    pub epsilon: f64,
    #[serde(default = "default_jao_actions")]
    pub actions: usize,
}

impl JaoSpec {
    fn validate(&self) -> Result<()> {
        if self.copies == 0 || self.actions == 0 {
            return Err(Error::Config("copies and actions must be positive".into()));
        }
        if !(self.delta > 0.0 && self.epsilon >= 0.0 && self.delta + self.epsilon <= 1.0) {
            return Err(Error::Config(format!(
                "need delta > 0, epsilon >= 0 and delta + epsilon <= 1, got delta {} epsilon {}",
                self.delta, self.epsilon
            )));
        }
        Ok(())
    }
}

/// The two-state instance: leaving state 0 has probability `delta`, or
/// `delta + epsilon` under action 0; state 1 pays 1 and returns with `delta`.
pub fn jao_component(spec: &JaoSpec) -> Result<TabularMdp> {
    spec.validate()?;
    let na = spec.actions;
    let mut transition = Vec::with_capacity(4 * na);
    for a in 0..na {
        let up = if a == 0 { spec.delta + spec.epsilon } else { spec.delta };
        transition.extend([1.0 - up, up]);
    }
    for _ in 0..na {
        transition.extend([spec.delta, 1.0 - spec.delta]);
    }
    let mut reward = vec![0.0; na];
    reward.extend(vec![1.0; na]);
    TabularMdp::new(2, na, transition, reward)
}

pub fn build_jao_product(spec: &JaoSpec) -> Result<FactoredMdp> {
    let c = jao_component(spec)?;
    cartesian_product(&vec![c; spec.copies], true)
}

/// Any environment the CLI and experiment configs can name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    Sysadmin(SysadminSpec),
    ProductCircle { copies: usize, cycle_len: usize },
    Jao(JaoSpec),
    /// An FMDP file; relative paths resolve against the config's directory.
    File { path: PathBuf },
}

impl EnvSpec {
    pub fn build(&self, base_dir: &Path) -> Result<FactoredMdp> {
        match self {
            EnvSpec::Sysadmin(s) => build_sysadmin(s),
            EnvSpec::ProductCircle { copies, cycle_len } => build_product_circle(*copies, *cycle_len),
            EnvSpec::Jao(s) => build_jao_product(s),
            EnvSpec::File { path } => load_mdp(&base_dir.join(path)),
        }
    }

    /// Sysadmin runs start with every machine working; everything else at index 0.
    pub fn initial_state(&self) -> usize {
        match self {
            EnvSpec::Sysadmin(s) => s.initial_state(),
            _ => 0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            EnvSpec::Sysadmin(s) => format!(
                "{}-{}",
                match s.topology {
                    Topology::Circle => "circle",
                    Topology::ThreeLeg => "three-leg",
                },
                s.size
            ),
            EnvSpec::ProductCircle { copies, cycle_len } => format!("product-circle-{copies}x{cycle_len}"),
            EnvSpec::Jao(s) => format!("jao-{}", s.copies),
            EnvSpec::File { path } => path.display().to_string(),
        }
    }
}
