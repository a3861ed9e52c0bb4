use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use evcs_agents::train::{rng_stream, stream};
use evcs_core::ScenarioId;
use evcs_harness::experiment::{load_artifacts, run_eval, run_train};
use evcs_harness::oracle::{solve_dp, OracleInstance, MAX_SOC_LEVELS};
use evcs_harness::{emit_reports, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "evcs",
    version,
    about = "Battery scheduling experiments for an EV charging station"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Restricts the run to these scenarios (repeatable).
    #[arg(long = "scenario")]
    scenarios: Vec<ScenarioId>,
    /// Overrides `experiment.output_dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.experiment.seed = seed;
        }
        if !self.scenarios.is_empty() {
            config.experiment.scenarios = self.scenarios.clone();
        }
        config.validate()?;
        let out = self.out.clone().unwrap_or_else(|| config.experiment.output_dir.clone());
        Ok((config, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured agents on every scenario.
    Train(Common),
    /// Evaluate trained checkpoints and the baselines.
    Eval(Common),
    /// Train, evaluate and write reports.
    Run(Common),
    /// Write reports from the run records in the output directory.
    Report(Common),
    /// Solve one day exactly by dynamic programming.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        day: usize,
        #[arg(long, default_value_t = MAX_SOC_LEVELS)]
        levels: usize,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn report(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let records = load_artifacts(out)?;
    let files = emit_reports(&records, &out.join("reports"), &config.reports)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn oracle(common: &Common, day: usize, levels: usize) -> Result<()> {
    let (config, out) = common.load()?;
    let [id] = config.experiment.scenarios[..] else {
        bail!("the oracle solves one scenario at a time; pass --scenario");
    };
    let env = config.env_config(id)?;
    let load = match &env.fixed_load_kw {
        Some(load) => load.clone(),
        None => {
            let mut rng = rng_stream(config.experiment.seed, stream::EVAL_ENV);
            let day_type = env.schedule.day_type(day);
            env.fleet
                .build_load_profile(day, day_type, env.intervals_per_day, env.dt_hours, &mut rng)
                .kw_per_interval
        }
    };
    let inst = OracleInstance::from_env(&env, day, load, levels);
    let sol = solve_dp(&inst)?;
    println!(
        "optimal cost ${:.4} (grid only ${:.4})",
        sol.cost_usd,
        inst.grid_only_cost()
    );
    let mut csv = String::from("t,soc,soc_next,p_ch,p_dis,p_grid,cost_usd\n");
    for s in &sol.path {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.t, s.soc, s.soc_next, s.p_ch, s.p_dis, s.p_grid, s.cost_usd
        ));
    }
    let path = out.join(id.label()).join("oracle_dispatch.csv");
    std::fs::create_dir_all(path.parent().unwrap())?;
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(c) => {
            let (config, out) = c.load()?;
            for run in run_train(&config, &out)? {
                let (first, last) = run.log.phase_means(0.2);
                println!(
                    "{} {}: {} episodes, mean return first 20% {first:.4}, last 20% {last:.4}",
                    run.scenario,
                    run.kind.label(),
                    run.log.len()
                );
            }
        }
        Command::Eval(c) => {
            let (config, out) = c.load()?;
            for r in run_eval(&config, &out)? {
                let e = r.eval.expect("evaluated");
                println!(
                    "{} {}: return {:.4}, cash ${:.2}",
                    r.scenario, r.controller, e.mean_return, e.cash_cost_usd
                );
            }
        }
        Command::Run(c) => {
            let (config, out) = c.load()?;
            run_train(&config, &out)?;
            run_eval(&config, &out)?;
            report(&config, &out)?;
        }
        Command::Report(c) => {
            let (config, out) = c.load()?;
            report(&config, &out)?;
        }
        Command::Oracle { common, day, levels } => oracle(&common, day, levels)?,
        Command::DefaultConfig => print!("{}", ExperimentConfig::default().to_toml()),
    }
    Ok(())
}
