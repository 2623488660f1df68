//! Fixtures shared by the planner benchmarks.

use fmdp_core::agents::{run_agent, AgentConfig, RunOptions};
use fmdp_core::confidence::VisitStatistics;
use fmdp_core::envs::{build_sysadmin, SysadminSpec};
use fmdp_core::FactoredMdp;

/// A sysadmin circle and the statistics of an f-Rmax trace of `steps` steps on it.
///
/// Rewards are replayed from the factor means, which is exact for the
/// deterministic sysadmin rewards.
pub fn circle_with_stats(size: usize, steps: u64, seed: u64) -> (FactoredMdp, VisitStatistics) {
    let env = build_sysadmin(&SysadminSpec::circle(size)).expect("valid sysadmin spec");
    let opts = RunOptions {
        initial_state: Some((1 << size) - 1),
        ..RunOptions::new(steps + 1, seed)
    };
    let record = run_agent(&env, &AgentConfig::frmax(30), &opts).expect("run completes");
    let spec = env.spec();
    let sizes = spec.component_sizes();
    let mut stats = VisitStatistics::new(env.structure());
    for w in record.states.windows(2).zip(&record.actions) {
        let ([s, next], &a) = (w.0, w.1) else { unreachable!() };
        let x = spec.joint(*s as usize, a as usize);
        let rewards: Vec<f64> = env
            .rewards()
            .iter()
            .map(|rf| rf.table[rf.scope.key(&x, sizes)].mean)
            .collect();
        stats
            .record_step(&x, &rewards, &spec.state_tuple(*next as usize))
            .expect("trace matches the model");
    }
    (env, stats)
}
