//! Online learners and the episode loop.

mod dorl;
mod frmax;
mod fsrl;
mod psrl;
mod run;
mod schedule;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::{VisitStatistics, WidthParams, DEFAULT_C_P, DEFAULT_C_R};
use crate::error::{Error, Result};
use crate::planners::{Plan, PlannerChoice};

pub use dorl::dorl_episode;
pub use frmax::{frmax_episode, known_model};
pub use fsrl::{fsrl_episode, project_to_simplex};
pub use psrl::{psrl_episode, sample_dirichlet, sample_posterior};
pub use run::{run_agent, visit_ratio, EpisodeDiagnostics, RunOptions, RunRecord, VisitRatio};
pub use schedule::{make_schedule, EpisodeSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Dorl,
    Psrl,
    Frmax,
    Fsrl,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dorl => "dorl",
            AgentKind::Psrl => "psrl",
            AgentKind::Frmax => "frmax",
            AgentKind::Fsrl => "fsrl",
        }
    }
}

fn default_rho() -> f64 {
    0.05
}

fn default_m_known() -> u64 {
    300
}

fn default_candidates() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// DORL/FSRL: replaces both width coefficients (unset keeps 18 and 12).
    /// PSRL: Dirichlet and Gaussian scale (unset means 1).
    #[serde(default)]
    pub c: Option<f64>,
    /// f-Rmax visit threshold for a scoped pair to count as known.
    #[serde(default = "default_m_known")]
    pub m_known: u64,
    /// FSRL bound on `Q(h)`; unset means unconstrained.
    #[serde(default)]
    pub span_budget: Option<f64>,
    /// FSRL random candidates per episode.
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default)]
    pub planner: PlannerChoice,
}

impl AgentConfig {
    pub fn new(kind: AgentKind) -> Self {
        AgentConfig {
            kind,
            rho: default_rho(),
            c: None,
            m_known: default_m_known(),
            span_budget: None,
            candidates: default_candidates(),
            planner: PlannerChoice::default(),
        }
    }

    pub fn dorl(c: f64) -> Self {
        AgentConfig {
            c: Some(c),
            ..Self::new(AgentKind::Dorl)
        }
    }

    pub fn psrl(c: f64) -> Self {
        AgentConfig {
            c: Some(c),
            ..Self::new(AgentKind::Psrl)
        }
    }

    pub fn frmax(m_known: u64) -> Self {
        AgentConfig {
            m_known,
            ..Self::new(AgentKind::Frmax)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("c must be positive, got {c}")));
            }
        }
        if self.m_known < 1 {
            return Err(Error::Config("m_known must be at least 1".into()));
        }
        if let Some(q) = self.span_budget {
            if !(q >= 0.0) {
                return Err(Error::Config(format!("span_budget must be nonnegative, got {q}")));
            }
        }
        if !(self.planner.tol > 0.0) || self.planner.max_iters == 0 {
            return Err(Error::Config("planner tolerance and iteration limit must be positive".into()));
        }
        Ok(())
    }

    /// Width parameters at episode start `t_k`.
    pub fn width_params(&self, t_k: u64) -> WidthParams {
        let (c_p, c_r) = match self.c {
            Some(c) => (c, c),
            None => (DEFAULT_C_P, DEFAULT_C_R),
        };
        WidthParams {
            rho: self.rho,
            t_k,
            c_p,
            c_r,
        }
    }

    pub fn psrl_scale(&self) -> f64 {
        self.c.unwrap_or(1.0)
    }

    /// The swept hyperparameter: `m_known` for f-Rmax, `c` otherwise.
    pub fn param(&self) -> f64 {
        match self.kind {
            AgentKind::Frmax => self.m_known as f64,
            _ => self.c.unwrap_or(f64::NAN),
        }
    }
}

/// A learner with its planner warm start carried across episodes.
#[derive(Clone, Debug)]
pub struct Agent {
    cfg: AgentConfig,
    warm: Option<Vec<f64>>,
}

impl Agent {
    pub fn new(cfg: AgentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Agent { cfg, warm: None })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    /// Computes the policy for the episode starting now, from the current statistics.
    pub fn plan_episode<R: Rng + ?Sized>(&mut self, stats: &VisitStatistics, rng: &mut R) -> Result<Plan> {
        let warm = self.warm.as_deref();
        let plan = match self.cfg.kind {
            AgentKind::Dorl => dorl_episode(stats, &self.cfg, warm)?,
            AgentKind::Psrl => psrl_episode(stats, &self.cfg, rng, warm)?,
            AgentKind::Frmax => frmax_episode(stats, self.cfg.m_known, &self.cfg.planner, warm)?,
            AgentKind::Fsrl => fsrl_episode(stats, &self.cfg, rng)?,
        };
        if let Some(b) = &plan.bias {
            self.warm = Some(b.clone());
        }
        Ok(plan)
    }
}
