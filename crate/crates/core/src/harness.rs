//! Multi-seed experiments: seeding, regret, quantiles and on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{run_agent, AgentConfig, AgentKind, RunOptions, RunRecord};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::factored::FactoredMdp;
use crate::solve::solve_average_reward;

/// Tolerance for the reference gain used in regret.
pub const REFERENCE_TOL: f64 = 1e-10;

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "FRL_WORKERS";

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `hash64(master, agent, sweep, seed)`: splitmix64 folded over the four words.
pub fn run_seed(master: u64, agent_index: usize, sweep_index: usize, seed_index: usize) -> u64 {
    [agent_index as u64, sweep_index as u64, seed_index as u64]
        .iter()
        .fold(splitmix(master), |h, &w| splitmix(h ^ w))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegretSeries {
    pub gain: f64,
    pub cum_reward: Vec<f64>,
    /// `R_t = t * gain - sum_{tau <= t} r_tau`, with `R_t` at index `t - 1`.
    pub cum_regret: Vec<f64>,
}

pub fn compute_regret(rewards: &[f64], gain: f64) -> RegretSeries {
    let mut acc = 0.0;
    let cum_reward: Vec<f64> = rewards
        .iter()
        .map(|r| {
            acc += r;
            acc
        })
        .collect();
    let cum_regret = cum_reward
        .iter()
        .enumerate()
        .map(|(t, c)| (t + 1) as f64 * gain - c)
        .collect();
    RegretSeries {
        gain,
        cum_reward,
        cum_regret,
    }
}

/// Linear-interpolation quantile of sorted data (the `(n - 1) q` rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

/// Per-index 25/50/75% quantiles across equally long series.
pub fn aggregate_quantiles(series: &[Vec<f64>]) -> Result<Vec<[f64; 3]>> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    if let Some(bad) = series.iter().position(|s| s.len() != first.len()) {
        return Err(Error::validation(format!(
            "series {bad} has length {} but series 0 has {}",
            series[bad].len(),
            first.len()
        )));
    }
    let mut column = vec![0.0; series.len()];
    Ok((0..first.len())
        .map(|t| {
            for (c, s) in column.iter_mut().zip(series) {
                *c = s[t];
            }
            column.sort_by(f64::total_cmp);
            [0.25, 0.5, 0.75].map(|q| quantile_sorted(&column, q))
        })
        .collect())
}

/// Steps (1-based counts) written to the per-run CSV: every `stride`-th
/// step, the last step of every episode, and the final step.
pub fn logged_steps(record: &RunRecord, stride: u64) -> Vec<(u64, usize)> {
    let horizon = record.rewards.len() as u64;
    let mut out = Vec::new();
    let mut episode = 0;
    let mut episode_end = record.schedule.lengths.first().copied().unwrap_or(0);
    for t in 1..=horizon {
        let boundary = t == episode_end;
        if (stride > 0 && t % stride == 0) || boundary || t == horizon {
            out.push((t, episode + 1));
        }
        if boundary && episode + 1 < record.schedule.lengths.len() {
            episode += 1;
            episode_end += record.schedule.lengths[episode];
        }
    }
    out
}

/// Decimal rendering with 12 significant digits and no trailing zeros.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

/// An agent together with the hyperparameter values to sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSweep {
    pub agent: AgentConfig,
    /// Values for `m_known` (f-Rmax) or `c` (everything else). Empty keeps the agent as written.
    #[serde(default)]
    pub sweep: Vec<f64>,
}

impl AgentSweep {
    pub fn expand(&self) -> Result<Vec<AgentConfig>> {
        if self.sweep.is_empty() {
            return Ok(vec![self.agent.clone()]);
        }
        self.sweep
            .iter()
            .map(|&v| {
                let mut cfg = self.agent.clone();
                match cfg.kind {
                    AgentKind::Frmax => {
                        if !(v >= 1.0 && v.fract() == 0.0) {
                            return Err(Error::Config(format!("m_known sweep values must be positive integers, got {v}")));
                        }
                        cfg.m_known = v as u64;
                    }
                    _ => cfg.c = Some(v),
                }
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

fn default_seeds() -> usize {
    20
}

fn default_stride() -> u64 {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub agents: Vec<AgentSweep>,
    pub horizon: u64,
    /// Schedule parameter; unset means the largest transition scope size.
    #[serde(default)]
    pub l: Option<u64>,
    #[serde(default = "default_seeds")]
    pub num_seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_stride")]
    pub log_stride: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Parses and validates; syntax and type errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.num_seeds < 1 {
            return Err(Error::Config("num_seeds must be at least 1".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::Config("at least one agent is required".into()));
        }
        if self.l == Some(0) {
            return Err(Error::Config("l must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        for sweep in &self.agents {
            sweep.agent.validate()?;
            sweep.expand()?;
        }
        Ok(())
    }
}

/// Optimal gain of the true environment from the exact planner.
pub fn reference_gain(env: &FactoredMdp) -> Result<f64> {
    Ok(solve_average_reward(&env.flatten()?, REFERENCE_TOL, crate::solve::DEFAULT_MAX_ITERS)?.gain())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub agent: String,
    pub param: f64,
    pub seed_index: usize,
    pub seed: u64,
    pub final_regret: f64,
    /// Regret per step over the first tenth of the horizon.
    pub first_decile_rate: f64,
    /// Regret per step over the last tenth of the horizon.
    pub last_decile_rate: f64,
    pub episodes: usize,
    pub planner_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub agent: String,
    pub param: f64,
    pub runs: usize,
    pub median_final_regret: f64,
    pub median_first_decile_rate: f64,
    pub median_last_decile_rate: f64,
    pub planner_failures: usize,
}

impl GroupSummary {
    /// Median late per-step regret at most `ratio` times the early one.
    pub fn sublinear(&self, ratio: f64) -> bool {
        self.median_last_decile_rate <= ratio * self.median_first_decile_rate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub env: String,
    pub optimal_gain: f64,
    pub horizon: u64,
    pub groups: Vec<GroupSummary>,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    pub fn group(&self, agent: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.agent == agent)
    }
}

/// Early and late per-step regret.
pub fn decile_rates(cum_regret: &[f64]) -> (f64, f64) {
    let t = cum_regret.len();
    let d = (t / 10).max(1);
    let at = |n: usize| if n == 0 { 0.0 } else { cum_regret[n - 1] };
    (at(d) / d as f64, (at(t) - at(t - d)) / d as f64)
}

struct Job {
    agent_index: usize,
    cfg: AgentConfig,
    seed_index: usize,
    seed: u64,
}

struct JobOutput {
    summary: RunSummary,
    logged: Vec<(u64, f64)>,
}

fn param_label(p: f64) -> String {
    if p.is_nan() {
        "default".into()
    } else {
        format_sig(p)
    }
}

/// Worker count: explicit argument, then the environment variable, then the config, then all cores.
pub fn resolve_workers(explicit: Option<usize>, cfg: &ExperimentConfig) -> Result<usize> {
    if let Some(w) = explicit {
        return Ok(w.max(1));
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w >= 1)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")));
    }
    Ok(cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Runs every (agent, sweep value, seed) triple and writes per-run CSVs,
/// `aggregate.csv`, `plot.py` and `summary.json` under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path, out_dir: &Path, workers: usize) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let env = cfg.env.build(base_dir)?;
    let gain = reference_gain(&env)?;
    let initial = cfg.env.initial_state();

    let mut jobs = Vec::new();
    for (ai, sweep) in cfg.agents.iter().enumerate() {
        for (si, agent) in sweep.expand()?.into_iter().enumerate() {
            for k in 0..cfg.num_seeds {
                jobs.push(Job {
                    agent_index: ai,
                    cfg: agent.clone(),
                    seed_index: k,
                    seed: run_seed(cfg.master_seed, ai, si, k),
                });
            }
        }
    }

    let runs_dir = out_dir.join("runs");
    fs::create_dir_all(&runs_dir).map_err(|e| io_error(&runs_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outputs: Vec<Result<JobOutput>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let opts = RunOptions {
                    l: cfg.l,
                    initial_state: Some(initial),
                    ..RunOptions::new(cfg.horizon, job.seed)
                };
                let record = run_agent(&env, &job.cfg, &opts)?;
                write_run(&runs_dir, job, &record, gain, cfg.log_stride)
            })
            .collect()
    });
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut groups = Vec::new();
    let mut aggregate = String::from("agent,param,t,q25,q50,q75\n");
    let mut order: Vec<(usize, String, u64)> = Vec::new();
    for (job, out) in jobs.iter().zip(&outputs) {
        let key = (job.agent_index, out.summary.agent.clone(), out.summary.param.to_bits());
        if !order.contains(&key) {
            order.push(key);
        }
    }
    for (ai, name, bits) in order {
        let members: Vec<&JobOutput> = jobs
            .iter()
            .zip(&outputs)
            .filter(|(j, o)| j.agent_index == ai && o.summary.param.to_bits() == bits)
            .map(|(_, o)| o)
            .collect();
        let param = f64::from_bits(bits);
        let series: Vec<Vec<f64>> = members.iter().map(|m| m.logged.iter().map(|x| x.1).collect()).collect();
        let qs = aggregate_quantiles(&series)?;
        for ((t, _), q) in members[0].logged.iter().zip(&qs) {
            writeln!(
                aggregate,
                "{name},{},{t},{},{},{}",
                param_label(param),
                format_sig(q[0]),
                format_sig(q[1]),
                format_sig(q[2])
            )
            .expect("writing to a string");
        }
        let med = |f: fn(&RunSummary) -> f64| quantile(&members.iter().map(|m| f(&m.summary)).collect::<Vec<_>>(), 0.5);
        groups.push(GroupSummary {
            agent: name,
            param,
            runs: members.len(),
            median_final_regret: med(|s| s.final_regret),
            median_first_decile_rate: med(|s| s.first_decile_rate),
            median_last_decile_rate: med(|s| s.last_decile_rate),
            planner_failures: members.iter().map(|m| m.summary.planner_failures).sum(),
        });
    }

    let summary = ExperimentSummary {
        env: cfg.env.label(),
        optimal_gain: gain,
        horizon: cfg.horizon,
        groups,
        runs: outputs.into_iter().map(|o| o.summary).collect(),
    };
    write_file(&out_dir.join("aggregate.csv"), &aggregate)?;
    write_file(&out_dir.join("plot.py"), PLOT_SCRIPT)?;
    let json = serde_json::to_string_pretty(&summary)?;
    write_file(&out_dir.join("summary.json"), &json)?;
    Ok(summary)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| io_error(path, e))
}

fn write_run(dir: &Path, job: &Job, record: &RunRecord, gain: f64, stride: u64) -> Result<JobOutput> {
    let agent = job.cfg.kind.name();
    let param = job.cfg.param();
    let regret = compute_regret(&record.rewards, gain);
    let steps = logged_steps(record, stride);
    let mut csv = String::from("agent,param,seed,t,episode,cum_reward,cum_regret\n");
    for &(t, ep) in &steps {
        let i = t as usize - 1;
        writeln!(
            csv,
            "{agent},{},{},{t},{ep},{},{}",
            param_label(param),
            job.seed,
            format_sig(regret.cum_reward[i]),
            format_sig(regret.cum_regret[i])
        )
        .expect("writing to a string");
    }
    let name = format!("{agent}_{}_{:03}.csv", param_label(param), job.seed_index);
    write_file(&dir.join(name), &csv)?;
    let (first, last) = decile_rates(&regret.cum_regret);
    Ok(JobOutput {
        summary: RunSummary {
            agent: agent.to_string(),
            param,
            seed_index: job.seed_index,
            seed: job.seed,
            final_regret: regret.cum_regret.last().copied().unwrap_or(0.0),
            first_decile_rate: first,
            last_decile_rate: last,
            episodes: record.episodes.len(),
            planner_failures: record.planner_failures,
        },
        logged: steps.iter().map(|&(t, _)| (t, regret.cum_regret[t as usize - 1])).collect(),
    })
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot median regret with the 25-75% band from aggregate.csv."""
import csv
import os
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
curves = defaultdict(lambda: ([], [], [], []))
with open(os.path.join(here, "aggregate.csv")) as f:
    for row in csv.DictReader(f):
        c = curves[(row["agent"], row["param"])]
        for dst, key in zip(c, ("t", "q25", "q50", "q75")):
            dst.append(float(row[key]))

fig, ax = plt.subplots(figsize=(7, 4.5))
for (agent, param), (t, lo, mid, hi) in sorted(curves.items()):
    ax.plot(t, mid, label=f"{agent} ({param})")
    ax.fill_between(t, lo, hi, alpha=0.2)
ax.set_xlabel("t")
ax.set_ylabel("cumulative regret")
ax.legend()
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "regret.png")
fig.savefig(out, dpi=150)
print(out)
"#;
