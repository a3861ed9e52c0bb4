//! Experiment configuration, read from TOML.
//!
//! Every section is optional; omitted keys take the library defaults.
//! Invalid values are reported with their dotted key path.

use std::path::{Path, PathBuf};

use evcs_agents::{AgentConfig, AgentError, SacConfig, Td3Config, TrainSchedule};
use evcs_core::battery::BessScenarioSpec;
use evcs_core::env::DEFAULT_SERVICE_LIFE_DAYS;
use evcs_core::fleet::{ChargingWindow, Lognormal};
use evcs_core::market::{Calendar, PeakWindow};
use evcs_core::{EnvConfig, EvcsError, FleetSpec, PriceSchedule, ScenarioId};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Sac,
    Td3,
}

impl AgentKind {
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Sac => "sac",
            AgentKind::Td3 => "td3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub scenarios: Vec<ScenarioId>,
    pub agents: Vec<AgentKind>,
    pub seed: u64,
    pub eval_seed: u64,
    /// Days `0..eval_days` of the calendar are evaluated.
    pub eval_days: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            scenarios: ScenarioId::ALL.to_vec(),
            agents: vec![AgentKind::Sac, AgentKind::Td3],
            seed: 7,
            eval_seed: 1_000_003,
            eval_days: 30,
            output_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub intervals_per_day: usize,
    pub dt_hours: f64,
    /// Defaults to 60% of the fleet's largest possible aggregate load.
    pub p_threshold_kw: Option<f64>,
    /// Defaults to the fleet's largest possible aggregate load.
    pub converter_cap_kw: Option<f64>,
    pub horizon_days: usize,
    pub service_life_days: f64,
    /// Defaults to the middle of the SOC window.
    pub initial_soc: Option<f64>,
    pub load_norm_kw: Option<f64>,
    pub fixed_load_kw: Option<Vec<f64>>,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            intervals_per_day: 24,
            dt_hours: 1.0,
            p_threshold_kw: None,
            converter_cap_kw: None,
            horizon_days: 30,
            service_life_days: DEFAULT_SERVICE_LIFE_DAYS,
            initial_soc: None,
            load_norm_kw: None,
            fixed_load_kw: None,
        }
    }
}

/// Overrides applied on top of each scenario's preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySection {
    pub nominal_capacity_kwh: Option<f64>,
    pub price_per_kwh_usd: Option<f64>,
    pub eta_ch: Option<f64>,
    pub eta_dis: Option<f64>,
    pub soc_min: Option<f64>,
    pub soc_max: Option<f64>,
    pub eol_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetSection {
    pub n_commercial: usize,
    pub n_private: usize,
    /// Log-space location and scale of daily mileage (km).
    pub mu_com: f64,
    pub sigma_com: f64,
    pub mu_pv: f64,
    pub sigma_pv: f64,
    pub lambda_km_per_kwh: f64,
    pub charger_cap_kw: f64,
    /// Half-open interval ranges `[start, end)`.
    pub commercial_window: [usize; 2],
    pub private_window: [usize; 2],
    pub weekend_commercial_factor: f64,
}

impl Default for FleetSection {
    fn default() -> Self {
        let f = FleetSpec::default();
        FleetSection {
            n_commercial: f.n_commercial,
            n_private: f.n_private,
            mu_com: f.commercial_mileage_km.mu,
            sigma_com: f.commercial_mileage_km.sigma,
            mu_pv: f.private_mileage_km.mu,
            sigma_pv: f.private_mileage_km.sigma,
            lambda_km_per_kwh: f.lambda_km_per_kwh,
            charger_cap_kw: f.charger_cap_kw,
            commercial_window: [f.commercial_window.start, f.commercial_window.end],
            private_window: [f.private_window.start, f.private_window.end],
            weekend_commercial_factor: f.weekend_commercial_factor,
        }
    }
}

impl FleetSection {
    pub fn to_spec(&self) -> FleetSpec {
        FleetSpec {
            n_commercial: self.n_commercial,
            n_private: self.n_private,
            commercial_mileage_km: Lognormal {
                mu: self.mu_com,
                sigma: self.sigma_com,
            },
            private_mileage_km: Lognormal {
                mu: self.mu_pv,
                sigma: self.sigma_pv,
            },
            lambda_km_per_kwh: self.lambda_km_per_kwh,
            charger_cap_kw: self.charger_cap_kw,
            commercial_window: ChargingWindow {
                start: self.commercial_window[0],
                end: self.commercial_window[1],
            },
            private_window: ChargingWindow {
                start: self.private_window[0],
                end: self.private_window[1],
            },
            weekend_commercial_factor: self.weekend_commercial_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    pub weekday_usd_per_kwh: Vec<f64>,
    pub weekend_usd_per_kwh: Vec<f64>,
    pub holiday_usd_per_kwh: Vec<f64>,
    /// Closed interval range `[start, end]`; omit to disable the peak penalty.
    pub peak_window: Option<[usize; 2]>,
    /// 0 = Monday.
    pub first_weekday: u32,
    pub holidays: Vec<usize>,
}

impl Default for MarketSection {
    fn default() -> Self {
        let s = PriceSchedule::default_tou();
        MarketSection {
            peak_window: s.peak.map(|w| [w.start, w.end]),
            weekday_usd_per_kwh: s.weekday_usd_per_kwh,
            weekend_usd_per_kwh: s.weekend_usd_per_kwh,
            holiday_usd_per_kwh: s.holiday_usd_per_kwh,
            first_weekday: s.calendar.first_weekday,
            holidays: s.calendar.holidays,
        }
    }
}

impl MarketSection {
    pub fn to_schedule(&self) -> PriceSchedule {
        PriceSchedule {
            weekday_usd_per_kwh: self.weekday_usd_per_kwh.clone(),
            weekend_usd_per_kwh: self.weekend_usd_per_kwh.clone(),
            holiday_usd_per_kwh: self.holiday_usd_per_kwh.clone(),
            peak: self.peak_window.map(|[start, end]| PeakWindow { start, end }),
            calendar: Calendar {
                first_weekday: self.first_weekday,
                holidays: self.holidays.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub reward_curves: bool,
    pub action_histograms: bool,
    pub cost_breakdown: bool,
    pub comparison: bool,
    pub traces: bool,
    pub histogram_bins: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            reward_curves: true,
            action_histograms: true,
            cost_breakdown: true,
            comparison: true,
            traces: true,
            histogram_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub env: EnvSection,
    pub battery: BatterySection,
    pub fleet: FleetSection,
    pub market: MarketSection,
    pub train: TrainSchedule,
    pub sac: SacConfig,
    pub td3: Td3Config,
    pub reports: ReportSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentSection::default(),
            env: EnvSection::default(),
            battery: BatterySection::default(),
            fleet: FleetSection::default(),
            market: MarketSection::default(),
            train: TrainSchedule {
                episodes: 300,
                calendar_days: 30,
                ..TrainSchedule::default()
            },
            sac: SacConfig {
                reward_scale: 0.1,
                lr_actor: 1e-3,
                lr_critic: 1e-3,
                lr_value: 1e-3,
                ..SacConfig::default()
            },
            td3: Td3Config {
                reward_scale: 0.1,
                lr_actor: 1e-3,
                lr_critic: 1e-3,
                ..Td3Config::default()
            },
            reports: ReportSection::default(),
        }
    }
}

fn config_error(key: impl Into<String>, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Re-roots a library validation error under its config section.
fn env_error(e: EvcsError) -> HarnessError {
    match e {
        EvcsError::InvalidConfig { key, reason } => config_error(key, reason),
        other => HarnessError::Env(other),
    }
}

fn agent_error(section: &str, e: AgentError) -> HarnessError {
    match e {
        AgentError::InvalidConfig { key, reason } => config_error(format!("{section}.{key}"), reason),
        other => HarnessError::Agent(other),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("", e.message()))?;
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            config_error(if key == "." { String::new() } else { key }, e.into_inner().message())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let exp = &self.experiment;
        if exp.scenarios.is_empty() {
            return Err(config_error(
                "experiment.scenarios",
                "at least one scenario is required",
            ));
        }
        for id in &exp.scenarios {
            self.env_config(*id)?;
        }
        self.train.validate().map_err(|e| agent_error("train", e))?;
        self.sac.validate().map_err(|e| agent_error("sac", e))?;
        self.td3.validate().map_err(|e| agent_error("td3", e))?;
        if self.reports.histogram_bins == 0 {
            return Err(config_error("reports.histogram_bins", "must be at least 1"));
        }
        Ok(())
    }

    pub fn scenario_spec(&self, id: ScenarioId) -> BessScenarioSpec {
        let b = &self.battery;
        let mut spec = BessScenarioSpec::preset(id);
        let overrides = [
            (&mut spec.nominal_capacity_kwh, b.nominal_capacity_kwh),
            (&mut spec.price_per_kwh_usd, b.price_per_kwh_usd),
            (&mut spec.eta_ch, b.eta_ch),
            (&mut spec.eta_dis, b.eta_dis),
            (&mut spec.soc_min, b.soc_min),
            (&mut spec.soc_max, b.soc_max),
            (&mut spec.eol_fraction, b.eol_fraction),
        ];
        for (slot, value) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        spec
    }

    /// The environment for one scenario, validated.
    pub fn env_config(&self, id: ScenarioId) -> Result<EnvConfig> {
        let e = &self.env;
        let scenario = self.scenario_spec(id);
        let fleet = self.fleet.to_spec();
        let max_load = fleet.max_aggregate_kw(e.intervals_per_day);
        let config = EnvConfig {
            initial_soc: e.initial_soc.unwrap_or(0.5 * (scenario.soc_min + scenario.soc_max)),
            scenario,
            schedule: self.market.to_schedule(),
            intervals_per_day: e.intervals_per_day,
            dt_hours: e.dt_hours,
            p_threshold_kw: e.p_threshold_kw.unwrap_or(0.6 * max_load),
            converter_cap_kw: e.converter_cap_kw.unwrap_or(max_load),
            horizon_days: e.horizon_days,
            service_life_days: e.service_life_days,
            load_norm_kw: e.load_norm_kw.unwrap_or(max_load),
            fixed_load_kw: e.fixed_load_kw.clone(),
            fleet,
        };
        config.validate().map_err(env_error)?;
        Ok(config)
    }

    pub fn agent_config(&self, kind: AgentKind) -> AgentConfig {
        match kind {
            AgentKind::Sac => AgentConfig::Sac(self.sac.clone()),
            AgentKind::Td3 => AgentConfig::Td3(self.td3.clone()),
        }
    }
}
