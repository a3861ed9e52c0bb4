use evcs_core::{Action, EnvConfig, EnvState};
use rand::{Rng, RngCore};

/// Highest price still inside the cheapest quarter of the day's intervals.
pub fn cheap_price_threshold(prices: &[f64]) -> f64 {
    let mut sorted = prices.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[prices.len().div_ceil(4) - 1]
}

/// Time-of-use heuristic: charge fully in the cheapest quartile of the day
/// (outside the peak window), discharge into the EV load during the peak,
/// otherwise serve EVs from the grid.
pub fn rule_based_policy(config: &EnvConfig, day: usize, state: &EnvState) -> Action {
    let spec = &config.scenario;
    let schedule = &config.schedule;
    let has_load = state.ev_load_kw > 0.0;
    let peak = schedule.is_peak(state.t);
    if peak && has_load && state.soc > spec.soc_min {
        return Action::new(0.0, 1.0, 0.0);
    }
    let cheap = state.price <= cheap_price_threshold(schedule.day_prices(day));
    let a1 = if !peak && cheap && state.soc < spec.soc_max {
        1.0
    } else {
        0.0
    };
    let a3 = if has_load { 1.0 } else { 0.0 };
    Action::new(a1, 0.0, a3)
}

/// Uniform over the action box.
pub fn random_action(rng: &mut dyn RngCore) -> Action {
    Action::new(rng.random(), rng.random(), rng.random())
}
