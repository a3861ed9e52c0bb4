//! Stationary battery model: scenario economics, SOC dynamics, rate limits
//! and throughput-based cycle accounting.
//!
//! SOC is the stored energy as a fraction of the usable capacity. A charge of
//! `p_ch` kW for `dt` hours adds `eta_ch * p_ch * dt` kWh; a discharge of
//! `p_dis` kW removes `p_dis * dt / eta_dis` kWh. With that convention the
//! rate limits [`BessScenarioSpec::charge_bound`] and
//! [`BessScenarioSpec::discharge_bound`] are exactly the powers that take the
//! pack to SOC 1 and SOC 0 in one interval.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, EvcsError, Result};

/// Slack allowed on the SOC window before a transition is rejected.
pub const SOC_TOLERANCE: f64 = 1e-9;

/// LFP pack price for a fresh battery, USD per kWh.
pub const LFP_PRICE_USD_PER_KWH: f64 = 389.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    #[serde(rename = "Fresh")]
    Fresh,
    #[serde(rename = "SLB80")]
    Slb80,
    #[serde(rename = "SLB60")]
    Slb60,
    #[serde(rename = "SLB40")]
    Slb40,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::Fresh,
        ScenarioId::Slb80,
        ScenarioId::Slb60,
        ScenarioId::Slb40,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioId::Fresh => "Fresh",
            ScenarioId::Slb80 => "SLB80",
            ScenarioId::Slb60 => "SLB60",
            ScenarioId::Slb40 => "SLB40",
        }
    }

    /// Remaining state of health of the pack.
    pub fn default_soh(self) -> f64 {
        match self {
            ScenarioId::Fresh => 1.0,
            ScenarioId::Slb80 => 0.8,
            ScenarioId::Slb60 => 0.6,
            ScenarioId::Slb40 => 0.4,
        }
    }

    /// Fraction of the fresh LFP price paid for the pack.
    pub fn capital_factor(self) -> f64 {
        match self {
            ScenarioId::Fresh => 1.0,
            ScenarioId::Slb80 => 0.75,
            ScenarioId::Slb60 => 0.57,
            ScenarioId::Slb40 => 0.40,
        }
    }

    /// Remaining full cycles before end of life.
    pub fn cycle_budget(self) -> u32 {
        match self {
            ScenarioId::Fresh => 15_000,
            ScenarioId::Slb80 => 10_000,
            ScenarioId::Slb60 => 7_500,
            ScenarioId::Slb40 => 5_000,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScenarioId {
    type Err = EvcsError;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                EvcsError::config(
                    "scenario",
                    format!("unknown scenario `{s}` (Fresh, SLB80, SLB60, SLB40)"),
                )
            })
    }
}

/// Per-scenario battery parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BessScenarioSpec {
    pub scenario_id: ScenarioId,
    pub nominal_capacity_kwh: f64,
    pub soh: f64,
    pub alpha_capital: f64,
    pub price_per_kwh_usd: f64,
    pub cycle_budget: u32,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// End-of-life capacity as a fraction of nominal. Informational only:
    /// capacity is constant within a simulation horizon.
    pub eol_fraction: f64,
}

impl BessScenarioSpec {
    /// Scenario defaults on a 200 kWh nominal pack.
    pub fn preset(id: ScenarioId) -> Self {
        BessScenarioSpec {
            scenario_id: id,
            nominal_capacity_kwh: 200.0,
            soh: id.default_soh(),
            alpha_capital: id.capital_factor(),
            price_per_kwh_usd: LFP_PRICE_USD_PER_KWH,
            cycle_budget: id.cycle_budget(),
            eta_ch: 0.95,
            eta_dis: 0.95,
            soc_min: 0.1,
            soc_max: 0.9,
            eol_fraction: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        ensure(
            finite_pos(self.nominal_capacity_kwh),
            "battery.nominal_capacity_kwh",
            || format!("must be positive, got {}", self.nominal_capacity_kwh),
        )?;
        ensure(self.soh > self.eol_fraction && self.soh <= 1.0, "battery.soh", || {
            format!("must lie in ({}, 1], got {}", self.eol_fraction, self.soh)
        })?;
        ensure(
            self.eol_fraction > 0.0 && self.eol_fraction < 1.0,
            "battery.eol_fraction",
            || format!("must lie in (0, 1), got {}", self.eol_fraction),
        )?;
        ensure(
            self.alpha_capital > 0.0 && self.alpha_capital <= 1.0,
            "battery.alpha_capital",
            || format!("must lie in (0, 1], got {}", self.alpha_capital),
        )?;
        ensure(
            self.price_per_kwh_usd.is_finite() && self.price_per_kwh_usd >= 0.0,
            "battery.price_per_kwh_usd",
            || format!("must be non-negative, got {}", self.price_per_kwh_usd),
        )?;
        ensure(self.cycle_budget > 0, "battery.cycle_budget", || {
            "must be positive".into()
        })?;
        for (key, eta) in [("battery.eta_ch", self.eta_ch), ("battery.eta_dis", self.eta_dis)] {
            ensure(eta > 0.0 && eta <= 1.0, key, || {
                format!("must lie in (0, 1], got {eta}")
            })?;
        }
        ensure(
            0.0 < self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0,
            "battery.soc_min",
            || {
                format!(
                    "need 0 < soc_min < soc_max <= 1, got [{}, {}]",
                    self.soc_min, self.soc_max
                )
            },
        )?;
        Ok(())
    }

    pub fn usable_capacity_kwh(&self) -> f64 {
        self.soh * self.nominal_capacity_kwh
    }

    /// Purchase cost of the pack in USD: `alpha * usable capacity * price`.
    pub fn capital_cost(&self) -> f64 {
        self.alpha_capital * self.usable_capacity_kwh() * self.price_per_kwh_usd
    }

    /// Wear cost in USD per kWh of throughput. The per-cycle cost
    /// `capital / cycle_budget` is spread over one full cycle's throughput
    /// (charge plus discharge of the usable capacity).
    pub fn degradation_rate(&self) -> f64 {
        self.capital_cost() / (f64::from(self.cycle_budget) * 2.0 * self.usable_capacity_kwh())
    }

    /// Largest charge power (kW) that keeps SOC at or below 1 over `dt_hours`.
    pub fn charge_bound(&self, state: &BessState, dt_hours: f64) -> f64 {
        (self.usable_capacity_kwh() * (1.0 - state.soc) / self.eta_ch / dt_hours).max(0.0)
    }

    /// Largest discharge power (kW) that keeps SOC at or above 0 over `dt_hours`.
    pub fn discharge_bound(&self, state: &BessState, dt_hours: f64) -> f64 {
        (self.usable_capacity_kwh() * state.soc * self.eta_dis / dt_hours).max(0.0)
    }

    /// Charge power (kW) that lands exactly on `soc_max`.
    pub fn charge_headroom(&self, state: &BessState, dt_hours: f64) -> f64 {
        (self.usable_capacity_kwh() * (self.soc_max - state.soc) / self.eta_ch / dt_hours).max(0.0)
    }

    /// Discharge power (kW) that lands exactly on `soc_min`.
    pub fn discharge_headroom(&self, state: &BessState, dt_hours: f64) -> f64 {
        (self.usable_capacity_kwh() * (state.soc - self.soc_min) * self.eta_dis / dt_hours).max(0.0)
    }

    /// SOC reached from `soc` after charging at `p_ch` and discharging at
    /// `p_dis` for `dt_hours`, with no window check.
    pub fn soc_after(&self, soc: f64, p_ch: f64, p_dis: f64, dt_hours: f64) -> f64 {
        soc + (self.eta_ch * p_ch - p_dis / self.eta_dis) * dt_hours / self.usable_capacity_kwh()
    }

    /// Advances the battery by one interval.
    ///
    /// Results within [`SOC_TOLERANCE`] of the window are snapped onto it;
    /// anything further out is a [`EvcsError::BoundsViolation`].
    pub fn apply_transition(&self, state: &BessState, p_ch: f64, p_dis: f64, dt_hours: f64) -> Result<BessState> {
        if p_ch < 0.0 || p_dis < 0.0 {
            return Err(EvcsError::NegativePower { p_ch, p_dis });
        }
        let soc = self.soc_after(state.soc, p_ch, p_dis, dt_hours);
        if soc < self.soc_min - SOC_TOLERANCE || soc > self.soc_max + SOC_TOLERANCE {
            return Err(EvcsError::BoundsViolation {
                soc,
                soc_min: self.soc_min,
                soc_max: self.soc_max,
            });
        }
        let throughput_kwh = state.throughput_kwh + (p_ch + p_dis) * dt_hours;
        Ok(BessState {
            soc: soc.clamp(self.soc_min, self.soc_max),
            throughput_kwh,
            cycles: throughput_kwh / (2.0 * self.usable_capacity_kwh()),
        })
    }
}

/// Evolving battery state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BessState {
    pub soc: f64,
    /// Cumulative charge plus discharge energy, kWh.
    pub throughput_kwh: f64,
    /// Equivalent full cycles: `throughput / (2 * usable capacity)`.
    pub cycles: f64,
}

impl BessState {
    pub fn new(soc: f64) -> Self {
        BessState {
            soc,
            throughput_kwh: 0.0,
            cycles: 0.0,
        }
    }
}
