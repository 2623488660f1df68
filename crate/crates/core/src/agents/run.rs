use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{make_schedule, Agent, AgentConfig, EpisodeSchedule};
use crate::confidence::{empirical_model, in_confidence_set, VisitStatistics, WidthParams, WidthTables};
use crate::error::{Error, Result};
use crate::factored::{FactoredMdp, FactoredStructure};

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub horizon: u64,
    /// Schedule parameter; unset means the largest transition scope size.
    pub l: Option<u64>,
    pub seed: u64,
    /// Flat start state; unset means index 0.
    pub initial_state: Option<usize>,
    /// When set, each episode records whether the truth lies in the set built with these parameters.
    pub confidence: Option<WidthParams>,
}

impl RunOptions {
    pub fn new(horizon: u64, seed: u64) -> Self {
        RunOptions {
            horizon,
            l: None,
            seed,
            initial_state: None,
            confidence: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeDiagnostics {
    pub start: u64,
    pub length: u64,
    /// Gain reported by the planner; NaN when planning failed.
    pub planner_gain: f64,
    pub planner_failed: bool,
    pub in_confidence: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub rewards: Vec<f64>,
    /// Flat state before each step.
    pub states: Vec<u32>,
    /// Flat action taken at each step.
    pub actions: Vec<u32>,
    pub schedule: EpisodeSchedule,
    pub episodes: Vec<EpisodeDiagnostics>,
    pub planner_failures: usize,
}

impl RunRecord {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Runs one learner on `env` for the configured horizon.
///
/// The environment and the learner draw from independent streams of the
/// same seed, so changing the learner never perturbs the noise the
/// environment would have produced for the same state-action sequence.
pub fn run_agent(env: &FactoredMdp, cfg: &AgentConfig, opts: &RunOptions) -> Result<RunRecord> {
    let structure = env.structure();
    let spec = env.spec().clone();
    let l = opts.l.unwrap_or(structure.max_scope_size() as u64);
    let schedule = make_schedule(l, opts.horizon);
    let mut agent = Agent::new(cfg.clone())?;
    let mut stats = VisitStatistics::new(structure);

    let mut env_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    env_rng.set_stream(1);
    let mut agent_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    agent_rng.set_stream(2);

    let start = opts.initial_state.unwrap_or(0);
    if start >= spec.num_states() {
        return Err(Error::Config(format!(
            "initial state {start} out of range for {} states",
            spec.num_states()
        )));
    }
    let mut state = spec.state_tuple(start);
    let mut flat_state = start;

    let cap = opts.horizon as usize;
    let mut rewards = Vec::with_capacity(cap);
    let mut states = Vec::with_capacity(cap);
    let mut actions = Vec::with_capacity(cap);
    let mut episodes = Vec::with_capacity(schedule.num_episodes());
    let mut policy: Option<Vec<usize>> = None;
    let mut failures = 0;

    for (&len, ep_start) in schedule.lengths.iter().zip(schedule.starts()) {
        let in_confidence = match &opts.confidence {
            Some(params) => {
                let params = WidthParams {
                    t_k: stats.time(),
                    ..*params
                };
                let widths = WidthTables::compute(&stats, &params);
                Some(in_confidence_set(env, &empirical_model(&stats), &widths)?.inside)
            }
            None => None,
        };
        let (planner_gain, planner_failed) = match agent.plan_episode(&stats, &mut agent_rng) {
            Ok(plan) => {
                let g = plan.gain;
                policy = Some(plan.policy);
                (g, false)
            }
            Err(e) if !e.is_validation() => {
                warn!("episode at t={ep_start}: planner failed ({e}); keeping previous policy");
                failures += 1;
                (f64::NAN, true)
            }
            Err(e) => return Err(e),
        };
        // Before any successful plan the learner falls back to action 0.
        let pi = policy.get_or_insert_with(|| vec![0; spec.num_states()]);
        episodes.push(EpisodeDiagnostics {
            start: ep_start,
            length: len,
            planner_gain,
            planner_failed,
            in_confidence,
        });
        for _ in 0..len {
            let a = pi[flat_state];
            let action = spec.action_tuple(a);
            let step = env.sample_step(&state, &action, &mut env_rng);
            let mut x = state.clone();
            x.extend_from_slice(&action);
            stats.record_step(&x, &step.rewards, &step.next_state)?;
            rewards.push(step.total);
            states.push(flat_state as u32);
            actions.push(a as u32);
            flat_state = spec.state_index(&step.next_state);
            state = step.next_state;
        }
    }

    Ok(RunRecord {
        seed: opts.seed,
        rewards,
        states,
        actions,
        schedule,
        episodes,
        planner_failures: failures,
    })
}

/// Both sides of the visit-ratio inequality for one transition scope.
#[derive(Clone, Debug, PartialEq)]
pub struct VisitRatio {
    pub factor: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl VisitRatio {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-9
    }
}

/// `sum_x sum_k nu_k(x) / sqrt(max(1, N_k(x)))` against `L * T_max + (2 + sqrt 2) sqrt(L T)`
/// for every transition scope, with `N_k` the count before episode `k`.
///
/// `L` is the schedule parameter recorded with the run.
pub fn visit_ratio(structure: &FactoredStructure, record: &RunRecord) -> Vec<VisitRatio> {
    let spec = &structure.spec;
    let l = record.schedule.l as f64;
    let t = record.rewards.len() as f64;
    let rhs = l * record.schedule.max_length() as f64 + (2.0 + 2f64.sqrt()) * (l * t).sqrt();
    (0..structure.transition_scopes.len())
        .map(|i| {
            let size = structure.transition_scope_size(i);
            let mut before = vec![0u64; size];
            let mut lhs = 0.0;
            for (&len, start) in record.schedule.lengths.iter().zip(record.schedule.starts()) {
                let mut nu = vec![0u64; size];
                for step in start..start + len {
                    let step = step as usize;
                    let x = spec.joint(record.states[step] as usize, record.actions[step] as usize);
                    nu[structure.transition_key(i, &x)] += 1;
                }
                for (key, &v) in nu.iter().enumerate() {
                    if v > 0 {
                        lhs += v as f64 / (before[key].max(1) as f64).sqrt();
                    }
                    before[key] += v;
                }
            }
            VisitRatio { factor: i, lhs, rhs }
        })
        .collect()
}
