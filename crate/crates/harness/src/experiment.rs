//! Training and evaluation across scenarios, with on-disk artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! <scenario>/<controller>/run.toml         run record (training log, evaluation)
//! <scenario>/<controller>/train_log.csv
//! <scenario>/<controller>/<network>.ckpt   final weights
//! <scenario>/<controller>/checkpoints/episode_<n>/<network>.ckpt
//! <scenario>/<controller>/eval_trace.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use evcs_agents::{rollout, Agent, Controller, Learner, TrainLog};
use evcs_core::env::write_trace_csv;
use evcs_core::{EnvConfig, ScenarioId};
use serde::{Deserialize, Serialize};

use crate::config::{AgentKind, ExperimentConfig};
use crate::cost::CostBreakdown;
use crate::error::{io_err, HarnessError, Result};
use crate::metrics::ActionHistogram;

pub const RULE: &str = "rule";
pub const RANDOM: &str = "random";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub days: usize,
    pub steps: usize,
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub cash_cost_usd: f64,
    pub breakdown: CostBreakdown,
    pub histogram: ActionHistogram,
    pub soc_violations: usize,
}

/// Everything recorded about one controller on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: ScenarioId,
    pub controller: String,
    pub train_log: Option<TrainLog>,
    pub eval: Option<EvalSummary>,
}

pub fn run_dir(out: &Path, scenario: ScenarioId, controller: &str) -> PathBuf {
    out.join(scenario.label()).join(controller)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn save_agent(agent: &dyn Agent, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, net) in agent.networks() {
        let path = dir.join(format!("{name}.ckpt"));
        diffnet::checkpoint::save(net, name, &path).map_err(|e| HarnessError::Checkpoint {
            path: path.clone(),
            reason: e.to_string(),
        })?;
    }
    Ok(())
}

/// Rebuilds a learner from the checkpoint files in `dir`.
pub fn load_learner(config: &ExperimentConfig, kind: AgentKind, dir: &Path) -> Result<Learner> {
    let mut learner = Learner::new(&config.agent_config(kind), config.experiment.seed)?;
    let names: Vec<&'static str> = learner.agent().networks().iter().map(|(n, _)| *n).collect();
    for name in names {
        let path = dir.join(format!("{name}.ckpt"));
        let ckpt_err = |reason: String| HarnessError::Checkpoint {
            path: path.clone(),
            reason,
        };
        let (net, label) = diffnet::checkpoint::load(&path).map_err(|e| ckpt_err(e.to_string()))?;
        if label != name {
            return Err(ckpt_err(format!("holds network `{label}`, expected `{name}`")));
        }
        learner
            .agent_mut()
            .set_network(name, net)
            .map_err(|e| ckpt_err(e.to_string()))?;
    }
    Ok(learner)
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| HarnessError::Artifact {
        path: path.to_path_buf(),
        reason: e.message().to_string(),
    })
}

pub fn write_record(out: &Path, record: &RunRecord) -> Result<()> {
    let text = toml::to_string(record).map_err(|e| HarnessError::Artifact {
        path: run_dir(out, record.scenario, &record.controller),
        reason: e.to_string(),
    })?;
    write_file(
        &run_dir(out, record.scenario, &record.controller).join("run.toml"),
        text.as_bytes(),
    )
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

/// Runs `f` for every scenario on its own thread; results keep scenario order.
fn per_scenario<T: Send>(scenarios: &[ScenarioId], f: impl Fn(ScenarioId) -> Result<T> + Sync) -> Result<Vec<T>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|&id| {
                let f = &f;
                s.spawn(move || f(id))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario worker panicked"))
            .collect()
    })
}

pub struct TrainedRun {
    pub scenario: ScenarioId,
    pub kind: AgentKind,
    pub learner: Learner,
    pub log: TrainLog,
}

/// Trains every configured agent on every scenario and writes checkpoints,
/// training logs and run records under `out`.
pub fn run_train(config: &ExperimentConfig, out: &Path) -> Result<Vec<TrainedRun>> {
    config.validate()?;
    let exp = &config.experiment;
    let runs = per_scenario(&exp.scenarios, |id| {
        let env = config.env_config(id)?;
        exp.agents
            .iter()
            .map(|&kind| train_one(config, &env, id, kind, out))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(runs.into_iter().flatten().collect())
}

fn train_one(
    config: &ExperimentConfig,
    env: &EnvConfig,
    id: ScenarioId,
    kind: AgentKind,
    out: &Path,
) -> Result<TrainedRun> {
    let dir = run_dir(out, id, kind.label());
    let seed = config.experiment.seed;
    let mut learner = Learner::new(&config.agent_config(kind), seed)?;
    let mut save_err = None;
    let log = evcs_agents::train_agent(env, learner.agent_mut(), &config.train, seed, &mut |episode, agent| {
        if let Err(e) = save_agent(agent, &dir.join("checkpoints").join(format!("episode_{episode}"))) {
            save_err = Some(e);
        }
        Ok(())
    })?;
    if let Some(e) = save_err {
        return Err(e);
    }
    save_agent(learner.agent(), &dir)?;
    write_file(&dir.join("train_log.csv"), &csv_bytes(|b| log.write_csv(b)))?;
    let record = RunRecord {
        scenario: id,
        controller: kind.label().into(),
        train_log: Some(log.clone()),
        eval: None,
    };
    write_record(out, &record)?;
    Ok(TrainedRun {
        scenario: id,
        kind,
        learner,
        log,
    })
}

/// Deterministic rollouts over days `0..eval_days`.
pub fn evaluate(
    config: &ExperimentConfig,
    env: &EnvConfig,
    controller: Controller<'_>,
) -> Result<(EvalSummary, Vec<evcs_core::TraceRecord>)> {
    let days: Vec<usize> = (0..config.experiment.eval_days).collect();
    let r = rollout(env, &days, controller, config.experiment.eval_seed)?;
    let summary = EvalSummary {
        days: days.len(),
        steps: r.trace.len(),
        mean_return: r.mean_return(),
        cash_cost_usd: r.total_cash_cost(),
        breakdown: CostBreakdown::from_trace(env, &r.trace, days.len()),
        histogram: ActionHistogram::from_trace(&r.trace, config.reports.histogram_bins),
        soc_violations: evcs_core::env::soc_violation_count(&r.trace),
        returns: r.returns,
    };
    Ok((summary, r.trace))
}

/// Evaluates trained agents (from their checkpoints under `out`) and the
/// rule and random baselines, updating each run record.
pub fn run_eval(config: &ExperimentConfig, out: &Path) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let exp = &config.experiment;
    let records = per_scenario(&exp.scenarios, |id| {
        let env = config.env_config(id)?;
        let mut records = Vec::new();
        for &kind in &exp.agents {
            let dir = run_dir(out, id, kind.label());
            let learner = load_learner(config, kind, &dir)?;
            let prior = dir.join("run.toml");
            let train_log = if prior.exists() {
                read_record(&prior)?.train_log
            } else {
                None
            };
            records.push(eval_one(
                config,
                &env,
                id,
                kind.label(),
                Controller::Agent(learner.agent()),
                train_log,
                out,
            )?);
        }
        for (name, controller) in [(RULE, Controller::Rule), (RANDOM, Controller::Random)] {
            records.push(eval_one(config, &env, id, name, controller, None, out)?);
        }
        Ok(records)
    })?;
    Ok(records.into_iter().flatten().collect())
}

fn eval_one(
    config: &ExperimentConfig,
    env: &EnvConfig,
    id: ScenarioId,
    name: &str,
    controller: Controller<'_>,
    train_log: Option<TrainLog>,
    out: &Path,
) -> Result<RunRecord> {
    let (summary, trace) = evaluate(config, env, controller)?;
    if config.reports.traces {
        let path = run_dir(out, id, name).join("eval_trace.csv");
        write_file(&path, &csv_bytes(|b| write_trace_csv(&trace, b)))?;
    }
    let record = RunRecord {
        scenario: id,
        controller: name.into(),
        train_log,
        eval: Some(summary),
    };
    write_record(out, &record)?;
    Ok(record)
}

fn controller_rank(name: &str) -> usize {
    ["sac", "td3", RULE, RANDOM]
        .iter()
        .position(|n| *n == name)
        .unwrap_or(usize::MAX)
}

/// Canonical order: scenario, then sac, td3, rule, random, then by name.
pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        (a.scenario, controller_rank(&a.controller), &a.controller).cmp(&(
            b.scenario,
            controller_rank(&b.controller),
            &b.controller,
        ))
    });
}

/// Reads every `run.toml` under `out`.
pub fn load_artifacts(out: &Path) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    if !out.exists() {
        return Ok(records);
    }
    for scenario in fs::read_dir(out).map_err(io_err(out))? {
        let scenario = scenario.map_err(io_err(out))?.path();
        if !scenario.is_dir() {
            continue;
        }
        for run in fs::read_dir(&scenario).map_err(io_err(&scenario))? {
            let path = run.map_err(io_err(&scenario))?.path().join("run.toml");
            if path.is_file() {
                records.push(read_record(&path)?);
            }
        }
    }
    sort_records(&mut records);
    Ok(records)
}
