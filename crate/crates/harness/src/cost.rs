use evcs_core::{EnvConfig, TraceRecord};
use serde::{Deserialize, Serialize};

/// Cash cost of a rollout, split by source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Grid purchases, `sum p_grid * price * dt`.
    pub operation_usd: f64,
    /// Degradation rate times battery throughput.
    pub degradation_usd: f64,
    /// Capital cost pro-rated over the evaluated days of the service life.
    pub capital_amortized_usd: f64,
    pub total_usd: f64,
}

impl CostBreakdown {
    pub fn new(operation_usd: f64, degradation_usd: f64, capital_amortized_usd: f64) -> Self {
        CostBreakdown {
            operation_usd,
            degradation_usd,
            capital_amortized_usd,
            total_usd: operation_usd + degradation_usd + capital_amortized_usd,
        }
    }

    /// Accounts for `days` evaluated days recorded in `trace`.
    pub fn from_trace(config: &EnvConfig, trace: &[TraceRecord], days: usize) -> Self {
        let dt = config.dt_hours;
        let operation: f64 = trace
            .iter()
            .map(|r| r.outcome.powers.p_grid * r.outcome.state.price * dt)
            .sum();
        let throughput_kwh: f64 = trace
            .iter()
            .map(|r| (r.outcome.powers.p_ch + r.outcome.powers.p_dis) * dt)
            .sum();
        let spec = &config.scenario;
        let capital = spec.capital_cost() * days as f64 / config.service_life_days;
        CostBreakdown::new(operation, spec.degradation_rate() * throughput_kwh, capital)
    }

    /// Operation plus degradation: the part an operator pays per step.
    pub fn cash_usd(&self) -> f64 {
        self.operation_usd + self.degradation_usd
    }
}
