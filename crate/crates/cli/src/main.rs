use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use fmdp_core::envs::{build_jao_product, build_product_circle, build_sysadmin, JaoSpec, SysadminSpec, Topology};
use fmdp_core::format::{save_mdp, FmdpFile};
use fmdp_core::harness::{resolve_workers, run_experiment, ExperimentConfig};
use fmdp_core::solve::{diameter, factored_span, solve_average_reward, span, DEFAULT_MAX_ITERS};
use fmdp_core::Error;

#[derive(Parser, Debug)]
#[command(name = "fmdp", version, about = "Regret experiments for learners in factored MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Concurrent runs (overrides FRL_WORKERS and the config).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a benchmark environment as an FMDP file.
    GenEnv {
        #[arg(long, value_enum)]
        topology: EnvKind,
        /// Machines for sysadmin networks, copies for jao, cycle length for product-circle.
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check an FMDP file and list every problem.
    Validate { file: PathBuf },
    /// Print sizes, diameter, optimal gain and spans of an FMDP file.
    Analyze {
        file: PathBuf,
        #[arg(long, default_value_t = 1e6)]
        cap: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnvKind {
    Circle,
    ThreeLeg,
    Jao,
    ProductCircle,
}

enum Outcome {
    Ok,
    Invalid,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Invalid) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_validation));
            ExitCode::from(if invalid { 1 } else { 2 })
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Run { config, workers, out } => run(&config, workers, out),
        Command::GenEnv {
            topology,
            size,
            seed,
            delta,
            epsilon,
            out,
        } => {
            let mdp = match topology {
                EnvKind::Circle => build_sysadmin(&SysadminSpec::new(Topology::Circle, size, seed))?,
                EnvKind::ThreeLeg => build_sysadmin(&SysadminSpec::new(Topology::ThreeLeg, size, seed))?,
                EnvKind::Jao => build_jao_product(&JaoSpec {
                    copies: size,
                    delta,
                    epsilon,
                    actions: 2,
                })?,
                EnvKind::ProductCircle => build_product_circle(2, size)?,
            };
            save_mdp(&mdp, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(Outcome::Ok)
        }
        Command::Validate { file } => validate(&file),
        Command::Analyze { file, cap, json } => analyze(&file, cap, json),
    }
}

fn run(config: &Path, workers: Option<usize>, out: Option<PathBuf>) -> Result<Outcome> {
    let cfg = ExperimentConfig::read(config).with_context(|| format!("reading {}", config.display()))?;
    let base = config.parent().unwrap_or(Path::new("."));
    let out = out.unwrap_or_else(|| base.join(&cfg.output_dir));
    let workers = resolve_workers(workers, &cfg)?;
    let summary = run_experiment(&cfg, base, &out, workers)?;
    println!("env {}  optimal gain {:.6}  horizon {}", summary.env, summary.optimal_gain, summary.horizon);
    println!("{:<8} {:>10} {:>6} {:>14} {:>12} {:>12} {:>9}", "agent", "param", "runs", "median regret", "early rate", "late rate", "failures");
    for g in &summary.groups {
        println!(
            "{:<8} {:>10} {:>6} {:>14.3} {:>12.5} {:>12.5} {:>9}",
            g.agent, g.param, g.runs, g.median_final_regret, g.median_first_decile_rate, g.median_last_decile_rate, g.planner_failures
        );
    }
    println!("artifacts in {}", out.display());
    Ok(Outcome::Ok)
}

fn validate(file: &Path) -> Result<Outcome> {
    let parsed = FmdpFile::read(file).with_context(|| format!("reading {}", file.display()))?;
    let report = match parsed.to_mdp() {
        Ok(mdp) => mdp.validate(),
        Err(report) => report,
    };
    if report.is_ok() {
        println!("ok");
        Ok(Outcome::Ok)
    } else {
        println!("{report}");
        Ok(Outcome::Invalid)
    }
}

fn analyze(file: &Path, cap: f64, as_json: bool) -> Result<Outcome> {
    let mdp = fmdp_core::format::load_mdp(file).with_context(|| format!("reading {}", file.display()))?;
    let structure = mdp.structure();
    let tab = mdp.flatten()?;
    let d = diameter(&tab, cap);
    let sol = solve_average_reward(&tab, 1e-10, DEFAULT_MAX_ITERS)?;
    let profile = factored_span(sol.bias(), mdp.spec().state_factor_sizes())?;
    let l = structure.max_scope_size();
    let w = mdp.spec().max_factor_size();
    if as_json {
        let value = json!({
            "states": tab.num_states(),
            "actions": tab.num_actions(),
            "max_scope_size": l,
            "max_factor_size": w,
            "diameter": d.value.finite(),
            "gain": sol.gain(),
            "span": span(sol.bias()),
            "factored_span": profile.q,
        });
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        println!("S        {}", tab.num_states());
        println!("A        {}", tab.num_actions());
        println!("L        {l}");
        println!("W        {w}");
        println!("D        {}", d.value);
        println!("gain     {:.9}", sol.gain());
        println!("sp(h)    {:.9}", span(sol.bias()));
        println!("Q(h)     {:.9}", profile.q);
    }
    Ok(Outcome::Ok)
}
