//! Exact dispatch optimization on small deterministic instances.
//!
//! The state of charge is restricted to `soc_levels` evenly spaced values
//! across the SOC window. Each interval the battery moves to any reachable
//! level; the EV load is always served, by the battery first up to the
//! chosen discharge and by the grid for the rest. Step cost is grid
//! purchases plus degradation, as in the environment's cash cost. The
//! final state of charge is free.

use evcs_core::{Action, BessState, EnvConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const MAX_SOC_LEVELS: usize = 51;
pub const MAX_INTERVALS: usize = 24;
/// Largest number of level sequences [`solve_enumeration`] will visit.
pub const MAX_ENUMERATION: u64 = 20_000_000;

const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub usable_capacity_kwh: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub degradation_usd_per_kwh: f64,
    pub prices: Vec<f64>,
    pub load_kw: Vec<f64>,
    pub dt_hours: f64,
    /// Must coincide with one of the grid levels.
    pub initial_soc: f64,
    pub soc_levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchStep {
    pub t: usize,
    pub soc: f64,
    pub soc_next: f64,
    pub p_ch: f64,
    pub p_dis: f64,
    pub p_grid: f64,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub cost_usd: f64,
    pub path: Vec<DispatchStep>,
}

impl OracleInstance {
    /// Day `day` of an environment with the given load profile.
    pub fn from_env(config: &EnvConfig, day: usize, load_kw: Vec<f64>, soc_levels: usize) -> Self {
        let s = &config.scenario;
        OracleInstance {
            usable_capacity_kwh: s.usable_capacity_kwh(),
            eta_ch: s.eta_ch,
            eta_dis: s.eta_dis,
            soc_min: s.soc_min,
            soc_max: s.soc_max,
            degradation_usd_per_kwh: s.degradation_rate(),
            prices: config.schedule.day_prices(day).to_vec(),
            load_kw,
            dt_hours: config.dt_hours,
            initial_soc: config.initial_soc,
            soc_levels,
        }
    }

    pub fn intervals(&self) -> usize {
        self.prices.len()
    }

    pub fn validate(&self) -> Result<()> {
        let big = |m: String| Err(HarnessError::OracleTooLarge(m));
        if self.soc_levels < 2 || self.soc_levels > MAX_SOC_LEVELS {
            return big(format!(
                "soc_levels = {} must lie in 2..={MAX_SOC_LEVELS}",
                self.soc_levels
            ));
        }
        if self.intervals() == 0 || self.intervals() > MAX_INTERVALS {
            return big(format!(
                "{} intervals, at most {MAX_INTERVALS} allowed",
                self.intervals()
            ));
        }
        let bad = |m: &str| Err(HarnessError::OracleInfeasible(m.to_string()));
        if self.load_kw.len() != self.intervals() {
            return bad("load and price profiles differ in length");
        }
        if self.soc_min >= self.soc_max || self.soc_min.is_nan() || self.usable_capacity_kwh <= 0.0 || self.dt_hours <= 0.0 {
            return bad("degenerate battery or interval length");
        }
        if self.eta_ch <= 0.0 || self.eta_dis <= 0.0 || self.load_kw.iter().any(|l| *l < 0.0) {
            return bad("efficiencies must be positive and loads non-negative");
        }
        self.initial_level().map(|_| ())
    }

    pub fn level_soc(&self, k: usize) -> f64 {
        self.soc_min + (self.soc_max - self.soc_min) * k as f64 / (self.soc_levels - 1) as f64
    }

    pub fn initial_level(&self) -> Result<usize> {
        let step = (self.soc_max - self.soc_min) / (self.soc_levels - 1) as f64;
        let k = ((self.initial_soc - self.soc_min) / step).round();
        if k < 0.0 || k as usize >= self.soc_levels || (self.level_soc(k as usize) - self.initial_soc).abs() > 1e-9 {
            return Err(HarnessError::OracleInfeasible(format!(
                "initial soc {} is not on the {}-level grid",
                self.initial_soc, self.soc_levels
            )));
        }
        Ok(k as usize)
    }

    /// The step moving from level `from` to level `to` in interval `t`, or
    /// `None` when the EV load cannot absorb the implied discharge.
    pub fn transition(&self, t: usize, from: usize, to: usize) -> Option<DispatchStep> {
        let (soc, soc_next) = (self.level_soc(from), self.level_soc(to));
        let de = (soc_next - soc) * self.usable_capacity_kwh;
        let (p_ch, p_dis) = if to >= from {
            (de / (self.eta_ch * self.dt_hours), 0.0)
        } else {
            (0.0, -de * self.eta_dis / self.dt_hours)
        };
        let load = self.load_kw[t];
        if p_dis > load + FEAS_TOL {
            return None;
        }
        let p_dis = p_dis.min(load);
        let p_grid = load - p_dis + p_ch;
        let cost_usd =
            p_grid * self.prices[t] * self.dt_hours + self.degradation_usd_per_kwh * (p_ch + p_dis) * self.dt_hours;
        Some(DispatchStep {
            t,
            soc,
            soc_next,
            p_ch,
            p_dis,
            p_grid,
            cost_usd,
        })
    }

    /// Serving every interval from the grid with the battery idle.
    pub fn grid_only_cost(&self) -> f64 {
        self.prices
            .iter()
            .zip(&self.load_kw)
            .map(|(p, l)| p * l * self.dt_hours)
            .sum()
    }
}

/// Backward dynamic programming over `(interval, level)`.
pub fn solve_dp(inst: &OracleInstance) -> Result<OracleSolution> {
    inst.validate()?;
    let (n, m) = (inst.intervals(), inst.soc_levels);
    // cost_to_go[t][k]: optimal cost of intervals t.. starting at level k.
    let mut cost_to_go = vec![vec![0.0; m]; n + 1];
    let mut choice = vec![vec![usize::MAX; m]; n];
    for t in (0..n).rev() {
        for from in 0..m {
            let mut best = f64::INFINITY;
            for to in 0..m {
                if let Some(step) = inst.transition(t, from, to) {
                    let c = step.cost_usd + cost_to_go[t + 1][to];
                    if c < best {
                        best = c;
                        choice[t][from] = to;
                    }
                }
            }
            cost_to_go[t][from] = best;
        }
    }
    let mut level = inst.initial_level()?;
    let mut path = Vec::with_capacity(n);
    for (t, row) in choice.iter().enumerate() {
        let next = row[level];
        path.push(inst.transition(t, level, next).expect("idle is always feasible"));
        level = next;
    }
    Ok(OracleSolution {
        cost_usd: cost_to_go[0][inst.initial_level()?],
        path,
    })
}

/// Brute force over every level sequence. Only for tiny instances.
pub fn solve_enumeration(inst: &OracleInstance) -> Result<OracleSolution> {
    inst.validate()?;
    let count = (inst.soc_levels as u64).checked_pow(inst.intervals() as u32);
    if count.is_none_or(|c| c > MAX_ENUMERATION) {
        return Err(HarnessError::OracleTooLarge(format!(
            "{}^{} sequences exceed the enumeration limit",
            inst.soc_levels,
            inst.intervals()
        )));
    }
    let mut best = OracleSolution {
        cost_usd: f64::INFINITY,
        path: Vec::new(),
    };
    let mut path = Vec::with_capacity(inst.intervals());
    enumerate(inst, inst.initial_level()?, 0.0, &mut path, &mut best);
    Ok(best)
}

fn enumerate(inst: &OracleInstance, level: usize, cost: f64, path: &mut Vec<DispatchStep>, best: &mut OracleSolution) {
    let t = path.len();
    if t == inst.intervals() {
        if cost < best.cost_usd {
            *best = OracleSolution {
                cost_usd: cost,
                path: path.clone(),
            };
        }
        return;
    }
    for to in 0..inst.soc_levels {
        if let Some(step) = inst.transition(t, level, to) {
            path.push(step);
            enumerate(inst, to, cost + step.cost_usd, path, best);
            path.pop();
        }
    }
}

/// Environment actions that reproduce `path` under the environment's
/// projection, for an environment built from the same instance.
pub fn dispatch_actions(config: &EnvConfig, path: &[DispatchStep], load_kw: &[f64]) -> Vec<Action> {
    let spec = &config.scenario;
    let dt = config.dt_hours;
    path.iter()
        .map(|s| {
            let bess = BessState::new(s.soc);
            let ratio = |p: f64, bound: f64| if bound > 0.0 { (p / bound).min(1.0) } else { 0.0 };
            let a1 = ratio(s.p_ch, spec.charge_bound(&bess, dt));
            let a2 = ratio(s.p_dis, spec.discharge_bound(&bess, dt));
            let a3 = ((load_kw[s.t] - s.p_dis) / config.converter_cap_kw).clamp(0.0, 1.0);
            Action::new(a1, a2, a3)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn arbitrage_instance() -> OracleInstance {
        OracleInstance {
            usable_capacity_kwh: 100.0,
            eta_ch: 1.0,
            eta_dis: 1.0,
            soc_min: 0.1,
            soc_max: 0.9,
            degradation_usd_per_kwh: 0.0,
            prices: vec![0.10, 0.30],
            load_kw: vec![0.0, 10.0],
            dt_hours: 1.0,
            initial_soc: 0.1,
            soc_levels: 9,
        }
    }

    #[test]
    fn two_interval_arbitrage() {
        let inst = arbitrage_instance();
        let sol = solve_dp(&inst).unwrap();
        assert!((sol.cost_usd - 1.0).abs() < 1e-12);
        assert!((inst.grid_only_cost() - 3.0).abs() < 1e-12);
        assert!((sol.path[0].p_ch - 10.0).abs() < 1e-9);
        assert!((sol.path[1].p_dis - 10.0).abs() < 1e-9);
    }

    #[test]
    fn guardrails() {
        let mut inst = arbitrage_instance();
        inst.soc_levels = 52;
        assert!(matches!(solve_dp(&inst), Err(HarnessError::OracleTooLarge(_))));
        let mut inst = arbitrage_instance();
        inst.prices = vec![0.1; 25];
        inst.load_kw = vec![0.0; 25];
        assert!(matches!(solve_dp(&inst), Err(HarnessError::OracleTooLarge(_))));
        let mut inst = arbitrage_instance();
        inst.initial_soc = 0.15;
        assert!(matches!(solve_dp(&inst), Err(HarnessError::OracleInfeasible(_))));
    }
}
