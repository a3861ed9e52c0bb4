//! The charging-station scheduling MDP.
//!
//! State is `[t, soc, price, ev_load]`; the action is three commands in
//! `[0, 1]` (charge the battery from the grid, discharge it into the EVs,
//! feed the EVs from the grid). Raw commands are projected onto the feasible
//! set so that power balance holds exactly, the EV demand is always met and
//! the SOC never leaves its window.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::battery::{BessScenarioSpec, BessState, ScenarioId, SOC_TOLERANCE};
use crate::error::{ensure, EvcsError, Result};
use crate::fleet::{FleetSpec, LoadProfile};
use crate::market::PriceSchedule;

/// Per-interval penalty while the battery is over its cycle budget.
pub const CYCLE_PENALTY: f64 = -1000.0;

/// Days in the assumed service life, used to pro-rate cycle budgets and
/// capital cost onto a simulation horizon.
pub const DEFAULT_SERVICE_LIFE_DAYS: f64 = 3650.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub scenario: BessScenarioSpec,
    pub fleet: FleetSpec,
    pub schedule: PriceSchedule,
    pub intervals_per_day: usize,
    pub dt_hours: f64,
    /// Target station load for the power-balance term, kW.
    pub p_threshold_kw: f64,
    /// Grid-to-EV converter rating, kW.
    pub converter_cap_kw: f64,
    /// Days in the horizon; normalizes rewards and pro-rates the cycle budget.
    pub horizon_days: usize,
    pub service_life_days: f64,
    pub initial_soc: f64,
    /// Upper end of the load feature's min-max range, kW.
    pub load_norm_kw: f64,
    /// Replaces the sampled fleet load with this fixed per-interval profile.
    pub fixed_load_kw: Option<Vec<f64>>,
}

impl EnvConfig {
    pub fn default_for(id: ScenarioId) -> Self {
        let scenario = BessScenarioSpec::preset(id);
        let fleet = FleetSpec::default();
        let max_load = fleet.max_aggregate_kw(24);
        EnvConfig {
            initial_soc: 0.5 * (scenario.soc_min + scenario.soc_max),
            scenario,
            fleet,
            schedule: PriceSchedule::default_tou(),
            intervals_per_day: 24,
            dt_hours: 1.0,
            p_threshold_kw: 0.6 * max_load,
            converter_cap_kw: max_load,
            horizon_days: 365,
            service_life_days: DEFAULT_SERVICE_LIFE_DAYS,
            load_norm_kw: max_load,
            fixed_load_kw: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let n = self.intervals_per_day;
        ensure(n > 0, "env.intervals_per_day", || "must be positive".into())?;
        ensure(
            self.dt_hours > 0.0 && (n as f64 * self.dt_hours - 24.0).abs() < 1e-9,
            "env.dt_hours",
            || format!("intervals_per_day * dt_hours must be 24, got {n} * {}", self.dt_hours),
        )?;
        self.fleet.validate(n)?;
        self.schedule.validate(n)?;
        ensure(self.p_threshold_kw > 0.0, "env.p_threshold_kw", || {
            "must be positive".into()
        })?;
        ensure(self.converter_cap_kw > 0.0, "env.converter_cap_kw", || {
            "must be positive".into()
        })?;
        ensure(self.horizon_days > 0, "env.horizon_days", || "must be positive".into())?;
        ensure(self.service_life_days > 0.0, "env.service_life_days", || {
            "must be positive".into()
        })?;
        ensure(
            self.scenario.soc_min <= self.initial_soc && self.initial_soc <= self.scenario.soc_max,
            "env.initial_soc",
            || format!("must lie in the SOC window, got {}", self.initial_soc),
        )?;
        ensure(self.load_norm_kw >= 0.0, "env.load_norm_kw", || {
            "must be non-negative".into()
        })?;
        if let Some(load) = &self.fixed_load_kw {
            ensure(load.len() == n, "env.fixed_load_kw", || {
                format!("expected {n} values, got {}", load.len())
            })?;
            ensure(
                load.iter().all(|kw| kw.is_finite() && *kw >= 0.0),
                "env.fixed_load_kw",
                || "loads must be non-negative".into(),
            )?;
        }
        Ok(())
    }

    /// Cycle budget pro-rated onto the horizon.
    pub fn cycle_budget_for_horizon(&self) -> f64 {
        f64::from(self.scenario.cycle_budget) * self.horizon_days as f64 / self.service_life_days
    }

    /// `D * Γ`, the divisor applied to every per-interval reward.
    pub fn reward_normalizer(&self) -> f64 {
        (self.horizon_days * self.intervals_per_day) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub t: usize,
    pub soc: f64,
    pub price: f64,
    pub ev_load_kw: f64,
}

/// Raw agent commands, each nominally in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    /// Battery charge from the grid, as a fraction of the charge bound.
    pub a1: f64,
    /// Battery discharge into the EVs, as a fraction of the discharge bound.
    pub a2: f64,
    /// Grid-to-EV supply, as a fraction of the converter rating.
    pub a3: f64,
}

impl Action {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Self {
        Action { a1, a2, a3 }
    }

    /// Clamps every component into `[0, 1]`; NaN becomes 0.
    pub fn clamped(self) -> Self {
        let c = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        Action {
            a1: c(self.a1),
            a2: c(self.a2),
            a3: c(self.a3),
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a1, self.a2, self.a3]
    }

    /// Signed battery command in `[-1, 1]`, positive when charging.
    pub fn bess_net(self) -> f64 {
        self.a1 - self.a2
    }
}

impl From<[f64; 3]> for Action {
    fn from(a: [f64; 3]) -> Self {
        Action {
            a1: a[0],
            a2: a[1],
            a3: a[2],
        }
    }
}

/// Powers implied by the raw action before any projection, kW.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RequestedPowers {
    pub p_ch: f64,
    pub p_dis: f64,
    pub p_grid_ev: f64,
}

/// Realized powers after projection, kW.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerFlows {
    /// Total grid import.
    pub p_grid: f64,
    pub p_ch: f64,
    pub p_dis: f64,
    /// Grid import routed straight to the EVs.
    pub p_grid_ev: f64,
}

impl PowerFlows {
    /// `p_grid + p_dis - (ev_load + p_ch)`; zero up to rounding.
    pub fn balance_residual(&self, ev_load_kw: f64) -> f64 {
        self.p_grid + self.p_dis - (ev_load_kw + self.p_ch)
    }
}

/// Maps a raw action to feasible powers.
///
/// 1. Scale commands by the rate bounds and the converter rating.
/// 2. Net simultaneous charge and discharge.
/// 3. Rescale discharge and grid-to-EV supply proportionally so they add up
///    to the EV load (both zero when there is no load).
/// 4. Cap discharge by the SOC floor and the load; cap charge by the SOC
///    ceiling. The grid covers whatever the battery does not.
pub fn project_action(config: &EnvConfig, state: &EnvState, raw: Action) -> (RequestedPowers, PowerFlows) {
    let spec = &config.scenario;
    let dt = config.dt_hours;
    let a = raw.clamped();
    let bess = BessState::new(state.soc);
    let requested = RequestedPowers {
        p_ch: a.a1 * spec.charge_bound(&bess, dt),
        p_dis: a.a2 * spec.discharge_bound(&bess, dt),
        p_grid_ev: a.a3 * config.converter_cap_kw,
    };

    let overlap = requested.p_ch.min(requested.p_dis);
    let mut p_ch = requested.p_ch - overlap;
    let mut p_dis = requested.p_dis - overlap;

    let load = state.ev_load_kw.max(0.0);
    let supply = p_dis + requested.p_grid_ev;
    p_dis = if load > 0.0 && supply > 0.0 {
        p_dis * (load / supply)
    } else {
        0.0
    };

    p_dis = p_dis.min(spec.discharge_headroom(&bess, dt)).min(load);
    p_ch = p_ch.min(spec.charge_headroom(&bess, dt));

    let p_grid_ev = load - p_dis;
    let flows = PowerFlows {
        p_grid: p_grid_ev + p_ch,
        p_ch,
        p_dis,
        p_grid_ev,
    };
    (requested, flows)
}

/// Whether the unprojected request would push SOC outside its window.
pub fn raw_request_violates(config: &EnvConfig, soc: f64, requested: &RequestedPowers) -> bool {
    let spec = &config.scenario;
    let next = spec.soc_after(soc, requested.p_ch, requested.p_dis, config.dt_hours);
    next < spec.soc_min - SOC_TOLERANCE || next > spec.soc_max + SOC_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub r_pb: f64,
    pub r_ch: f64,
    pub r_dis: f64,
    pub r_peak: f64,
    pub c_deg: f64,
    pub e_cycle: f64,
}

impl RewardComponents {
    /// Unnormalized per-interval reward.
    pub fn sum(&self) -> f64 {
        self.r_pb + self.r_ch + self.r_dis + self.r_peak - self.c_deg + self.e_cycle
    }
}

/// Evaluates the reward terms for one interval.
///
/// `future_price` is the price of a uniformly drawn interval in
/// `t..intervals` of the same day; `cycles` is the cumulative cycle count
/// after the interval's transition.
pub fn reward_terms(
    config: &EnvConfig,
    state: &EnvState,
    flows: &PowerFlows,
    future_price: f64,
    cycles: f64,
) -> RewardComponents {
    let deviation = state.ev_load_kw + flows.p_ch - flows.p_dis - config.p_threshold_kw;
    let r_pb = -deviation * deviation;
    RewardComponents {
        r_pb,
        r_ch: flows.p_ch * (future_price - state.price),
        r_dis: flows.p_dis * (state.price - future_price),
        r_peak: if config.schedule.is_peak(state.t) { r_pb } else { 0.0 },
        c_deg: config.scenario.degradation_rate() * (flows.p_ch + flows.p_dis) * config.dt_hours,
        e_cycle: if cycles >= config.cycle_budget_for_horizon() {
            CYCLE_PENALTY
        } else {
            0.0
        },
    }
}

/// [`reward_terms`] with the future price drawn from `rng`.
pub fn reward_components<R: Rng + ?Sized>(
    config: &EnvConfig,
    day_index: usize,
    state: &EnvState,
    flows: &PowerFlows,
    cycles: f64,
    rng: &mut R,
) -> RewardComponents {
    let future = config.schedule.future_price_sample(day_index, state.t, rng);
    reward_terms(config, state, flows, future, cycles)
}

/// Grid purchases plus battery wear for one interval, USD.
pub fn cash_cost(config: &EnvConfig, price: f64, flows: &PowerFlows) -> f64 {
    let dt = config.dt_hours;
    flows.p_grid * price * dt + config.scenario.degradation_rate() * (flows.p_ch + flows.p_dis) * dt
}

/// Min-max scaling of the four state features onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScaler {
    ranges: [(f64, f64); 4],
}

impl StateScaler {
    pub fn new(config: &EnvConfig) -> Self {
        StateScaler {
            ranges: [
                (0.0, config.intervals_per_day.saturating_sub(1) as f64),
                (config.scenario.soc_min, config.scenario.soc_max),
                (config.schedule.min_price(), config.schedule.max_price()),
                (0.0, config.load_norm_kw),
            ],
        }
    }

    pub fn normalize(&self, state: &EnvState) -> [f64; 4] {
        let raw = [state.t as f64, state.soc, state.price, state.ev_load_kw];
        std::array::from_fn(|i| {
            let (lo, hi) = self.ranges[i];
            if hi - lo <= 0.0 {
                0.0
            } else {
                ((raw[i] - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        })
    }
}

pub fn normalize_state(config: &EnvConfig, state: &EnvState) -> [f64; 4] {
    StateScaler::new(config).normalize(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `components.sum() / (D * Γ)`.
    pub reward: f64,
    pub components: RewardComponents,
    pub requested: RequestedPowers,
    pub powers: PowerFlows,
    pub cash_cost_usd: f64,
    pub state: EnvState,
    pub next_state: EnvState,
    pub done: bool,
    /// The raw request would have left the SOC window.
    pub soc_violation: bool,
    pub cycles: f64,
}

/// One episode is one day of `intervals_per_day` steps. Battery throughput
/// accumulates across episodes until [`Env::reset_horizon`].
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    scaler: StateScaler,
    day: usize,
    t: usize,
    battery: BessState,
    load_kw: Vec<f64>,
    clamped_evs: usize,
}

impl Env {
    /// The environment starts finished; call [`Env::reset`] before stepping.
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Env {
            scaler: StateScaler::new(&config),
            day: 0,
            t: config.intervals_per_day,
            battery: BessState::new(config.initial_soc),
            load_kw: vec![0.0; config.intervals_per_day],
            clamped_evs: 0,
            config,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn day(&self) -> usize {
        self.day
    }

    pub fn battery(&self) -> &BessState {
        &self.battery
    }

    pub fn load_kw(&self) -> &[f64] {
        &self.load_kw
    }

    pub fn clamped_evs(&self) -> usize {
        self.clamped_evs
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.config.intervals_per_day
    }

    /// Starts `day_index`: SOC back to its initial value, a fresh load
    /// profile, `t = 0`. Cumulative throughput is kept.
    pub fn reset<R: Rng + ?Sized>(&mut self, day_index: usize, rng: &mut R) -> EnvState {
        let c = &self.config;
        self.day = day_index;
        self.t = 0;
        self.battery.soc = c.initial_soc;
        match &c.fixed_load_kw {
            Some(load) => {
                self.load_kw.clone_from(load);
                self.clamped_evs = 0;
            }
            None => {
                let profile: LoadProfile = c.fleet.build_load_profile(
                    day_index,
                    c.schedule.day_type(day_index),
                    c.intervals_per_day,
                    c.dt_hours,
                    rng,
                );
                self.load_kw = profile.kw_per_interval;
                self.clamped_evs = profile.clamped_evs;
            }
        }
        self.state()
    }

    /// Clears accumulated throughput at the start of a new horizon.
    pub fn reset_horizon(&mut self) {
        self.battery = BessState::new(self.battery.soc);
    }

    pub fn state(&self) -> EnvState {
        let t = self.t.min(self.config.intervals_per_day - 1);
        EnvState {
            t: self.t,
            soc: self.battery.soc,
            price: self.config.schedule.day_prices(self.day)[t],
            ev_load_kw: if self.is_done() { 0.0 } else { self.load_kw[t] },
        }
    }

    pub fn observe(&self, state: &EnvState) -> [f64; 4] {
        self.scaler.normalize(state)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, raw: Action, rng: &mut R) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(EvcsError::EpisodeFinished);
        }
        let c = &self.config;
        let state = self.state();
        let (requested, powers) = project_action(c, &state, raw);
        let soc_violation = raw_request_violates(c, state.soc, &requested);
        self.battery = c
            .scenario
            .apply_transition(&self.battery, powers.p_ch, powers.p_dis, c.dt_hours)?;
        let components = reward_components(c, self.day, &state, &powers, self.battery.cycles, rng);
        let cash_cost_usd = cash_cost(c, state.price, &powers);
        self.t += 1;
        Ok(StepOutcome {
            reward: components.sum() / c.reward_normalizer(),
            components,
            requested,
            powers,
            cash_cost_usd,
            state,
            next_state: self.state(),
            done: self.is_done(),
            soc_violation,
            cycles: self.battery.cycles,
        })
    }
}

/// One row of a rollout trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub day: usize,
    pub action: Action,
    pub outcome: StepOutcome,
}

pub fn soc_violation_count(trace: &[TraceRecord]) -> usize {
    trace.iter().filter(|r| r.outcome.soc_violation).count()
}

pub const TRACE_CSV_HEADER: &str = "day,t,price,ev_load,a1,a2,a3,p_ch_req,p_dis_req,p_ch,p_dis,p_grid,p_grid_ev,\
soc,soc_next,r_pb,r_ch,r_dis,r_peak,c_deg,e_cycle,reward,cash_cost,soc_violation";

pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for r in trace {
        let o = &r.outcome;
        let (s, p, c) = (&o.state, &o.powers, &o.components);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.day,
            s.t,
            s.price,
            s.ev_load_kw,
            r.action.a1,
            r.action.a2,
            r.action.a3,
            o.requested.p_ch,
            o.requested.p_dis,
            p.p_ch,
            p.p_dis,
            p.p_grid,
            p.p_grid_ev,
            s.soc,
            o.next_state.soc,
            c.r_pb,
            c.r_ch,
            c.r_dis,
            c.r_peak,
            c.c_deg,
            c.e_cycle,
            o.reward,
            o.cash_cost_usd,
            u8::from(o.soc_violation),
        )?;
    }
    Ok(())
}
