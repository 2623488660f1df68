use crate::agents::AgentConfig;
use crate::confidence::{empirical_model, VisitStatistics, WidthTables};
use crate::error::Result;
use crate::extended::{build_extended, plan_extended};
use crate::planners::Plan;

/// Widths at the current time, the extended model, and its optimal policy mapped back.
pub fn dorl_episode(stats: &VisitStatistics, cfg: &AgentConfig, warm: Option<&[f64]>) -> Result<Plan> {
    let model = empirical_model(stats);
    let widths = WidthTables::compute(stats, &cfg.width_params(stats.time()));
    let ext = build_extended(&model, &widths)?;
    plan_extended(&ext, &cfg.planner, warm)
}
