//! Stochastic daily EV charging demand.
//!
//! Each vehicle draws a lognormal daily mileage, converts it to an energy
//! need, and charges in a single contiguous session at its charger rate
//! somewhere inside its class window. The station load is the sum of the
//! sessions.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::market::DayType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvClass {
    Commercial,
    Private,
}

/// Lognormal law on the natural-log scale: `ln(x) ~ N(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lognormal {
    pub mu: f64,
    pub sigma: f64,
}

impl Lognormal {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mu + self.sigma * z).exp()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let d = x.ln() - self.mu;
        (-(d * d) / (2.0 * self.sigma * self.sigma)).exp() / (x * self.sigma * (2.0 * PI).sqrt())
    }

    pub fn median(&self) -> f64 {
        self.mu.exp()
    }

    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }
}

/// Half-open range `[start, end)` of interval indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChargingWindow {
    pub start: usize,
    pub end: usize,
}

impl ChargingWindow {
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSpec {
    pub n_commercial: usize,
    pub n_private: usize,
    pub commercial_mileage_km: Lognormal,
    pub private_mileage_km: Lognormal,
    /// Vehicle efficiency, km per kWh.
    pub lambda_km_per_kwh: f64,
    pub charger_cap_kw: f64,
    pub commercial_window: ChargingWindow,
    pub private_window: ChargingWindow,
    /// Multiplier on commercial mileage on weekends and holidays.
    pub weekend_commercial_factor: f64,
}

impl Default for FleetSpec {
    fn default() -> Self {
        FleetSpec {
            n_commercial: 20,
            n_private: 30,
            commercial_mileage_km: Lognormal {
                mu: 80f64.ln(),
                sigma: 0.4,
            },
            private_mileage_km: Lognormal {
                mu: 40f64.ln(),
                sigma: 0.5,
            },
            lambda_km_per_kwh: 6.0,
            charger_cap_kw: 11.0,
            commercial_window: ChargingWindow { start: 8, end: 18 },
            private_window: ChargingWindow { start: 18, end: 22 },
            weekend_commercial_factor: 0.5,
        }
    }
}

impl FleetSpec {
    pub fn empty() -> Self {
        FleetSpec {
            n_commercial: 0,
            n_private: 0,
            ..FleetSpec::default()
        }
    }

    pub fn n_ev(&self) -> usize {
        self.n_commercial + self.n_private
    }

    pub fn validate(&self, intervals: usize) -> Result<()> {
        ensure(self.commercial_mileage_km.sigma > 0.0, "fleet.sigma_com", || {
            "must be positive".into()
        })?;
        ensure(self.private_mileage_km.sigma > 0.0, "fleet.sigma_pv", || {
            "must be positive".into()
        })?;
        ensure(self.commercial_mileage_km.mu.is_finite(), "fleet.mu_com", || {
            "must be finite".into()
        })?;
        ensure(self.private_mileage_km.mu.is_finite(), "fleet.mu_pv", || {
            "must be finite".into()
        })?;
        ensure(self.lambda_km_per_kwh > 0.0, "fleet.lambda_km_per_kwh", || {
            "must be positive".into()
        })?;
        ensure(self.charger_cap_kw > 0.0, "fleet.charger_cap_kw", || {
            "must be positive".into()
        })?;
        ensure(
            self.weekend_commercial_factor >= 0.0,
            "fleet.weekend_commercial_factor",
            || "must be non-negative".into(),
        )?;
        for (key, w) in [
            ("fleet.commercial_window", self.commercial_window),
            ("fleet.private_window", self.private_window),
        ] {
            ensure(!w.is_empty() && w.end <= intervals, key, || {
                format!(
                    "window [{}, {}) must be non-empty and end by interval {intervals}",
                    w.start, w.end
                )
            })?;
        }
        Ok(())
    }

    pub fn window(&self, class: EvClass) -> ChargingWindow {
        match class {
            EvClass::Commercial => self.commercial_window,
            EvClass::Private => self.private_window,
        }
    }

    pub fn sample_daily_mileage<R: Rng + ?Sized>(&self, class: EvClass, day_type: DayType, rng: &mut R) -> f64 {
        match class {
            EvClass::Commercial => {
                let km = self.commercial_mileage_km.sample(rng);
                if day_type.is_workday() {
                    km
                } else {
                    km * self.weekend_commercial_factor
                }
            }
            EvClass::Private => self.private_mileage_km.sample(rng),
        }
    }

    /// Largest possible aggregate load in any interval, kW.
    pub fn max_aggregate_kw(&self, intervals: usize) -> f64 {
        (0..intervals)
            .map(|t| {
                let com = if self.commercial_window.contains(t) {
                    self.n_commercial
                } else {
                    0
                };
                let pv = if self.private_window.contains(t) {
                    self.n_private
                } else {
                    0
                };
                (com + pv) as f64 * self.charger_cap_kw
            })
            .fold(0.0, f64::max)
    }

    /// Samples one day of station load.
    ///
    /// A vehicle whose need exceeds what its window can deliver at
    /// `charger_cap_kw` is clamped to the window capacity and counted in
    /// [`LoadProfile::clamped_evs`].
    pub fn build_load_profile<R: Rng + ?Sized>(
        &self,
        day_index: usize,
        day_type: DayType,
        intervals: usize,
        dt_hours: f64,
        rng: &mut R,
    ) -> LoadProfile {
        let mut profile = LoadProfile {
            day_index,
            kw_per_interval: vec![0.0; intervals],
            clamped_evs: 0,
            served_kwh: 0.0,
        };
        let vehicles = std::iter::repeat_n(EvClass::Commercial, self.n_commercial)
            .chain(std::iter::repeat_n(EvClass::Private, self.n_private));
        for class in vehicles {
            let km = self.sample_daily_mileage(class, day_type, rng);
            let need = daily_energy_need(km, self.lambda_km_per_kwh);
            self.place_session(&mut profile, self.window(class), need, dt_hours, rng);
        }
        profile
    }

    fn place_session<R: Rng + ?Sized>(
        &self,
        profile: &mut LoadProfile,
        window: ChargingWindow,
        need_kwh: f64,
        dt_hours: f64,
        rng: &mut R,
    ) {
        let per_interval_kwh = self.charger_cap_kw * dt_hours;
        let window_kwh = per_interval_kwh * window.len() as f64;
        let need = if need_kwh > window_kwh {
            profile.clamped_evs += 1;
            window_kwh
        } else {
            need_kwh
        };
        if need <= 0.0 {
            return;
        }
        let full = ((need / per_interval_kwh).floor() as usize).min(window.len());
        let remainder = need - full as f64 * per_interval_kwh;
        let partial = remainder > 1e-12 * per_interval_kwh.max(1.0) && full < window.len();
        let span = full + usize::from(partial);
        let start = rng.random_range(window.start..=window.end - span);
        for slot in &mut profile.kw_per_interval[start..start + full] {
            *slot += self.charger_cap_kw;
        }
        if partial {
            profile.kw_per_interval[start + full] += remainder / dt_hours;
        }
        profile.served_kwh += need;
    }
}

/// Daily energy requirement in kWh for a given mileage.
pub fn daily_energy_need(mileage_km: f64, lambda_km_per_kwh: f64) -> f64 {
    mileage_km / lambda_km_per_kwh
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    pub day_index: usize,
    pub kw_per_interval: Vec<f64>,
    /// Vehicles whose need was cut to their window's capacity.
    pub clamped_evs: usize,
    /// Sum of per-vehicle (possibly clamped) energy needs, kWh.
    pub served_kwh: f64,
}

impl LoadProfile {
    pub fn energy_kwh(&self, dt_hours: f64) -> f64 {
        self.kw_per_interval.iter().sum::<f64>() * dt_hours
    }
}

/// Writes profiles as `day,interval,kw` rows.
pub fn write_profiles_csv<W: Write>(profiles: &[LoadProfile], mut out: W) -> io::Result<()> {
    writeln!(out, "day,interval,kw")?;
    for p in profiles {
        for (t, kw) in p.kw_per_interval.iter().enumerate() {
            writeln!(out, "{},{},{}", p.day_index, t, kw)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn energy_need() {
        assert_eq!(daily_energy_need(48.0, 6.0), 8.0);
        assert_eq!(daily_energy_need(0.0, 6.0), 0.0);
        assert_eq!(daily_energy_need(90.0, 6.0), 15.0);
    }

    #[test]
    fn degenerate_lognormal_is_its_median() {
        let d = Lognormal {
            mu: 40f64.ln(),
            sigma: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(d.sample(&mut rng), 40f64.ln().exp());
        }
    }

    #[test]
    fn pdf_value() {
        let d = Lognormal {
            mu: 40f64.ln(),
            sigma: 0.5,
        };
        assert!((d.pdf(40.0) - 0.019947).abs() < 5e-7);
        assert_eq!(d.pdf(0.0), 0.0);
    }

    #[test]
    fn empty_fleet_has_no_load() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = FleetSpec::empty().build_load_profile(0, DayType::Weekday, 24, 1.0, &mut rng);
        assert!(p.kw_per_interval.iter().all(|&kw| kw == 0.0));
        assert_eq!(p.served_kwh, 0.0);
    }

    #[test]
    fn single_private_ev_session() {
        let fleet = FleetSpec {
            n_commercial: 0,
            n_private: 1,
            private_mileage_km: Lognormal {
                mu: 48f64.ln(),
                sigma: 0.0,
            },
            ..FleetSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let p = fleet.build_load_profile(0, DayType::Weekday, 24, 1.0, &mut rng);
            assert!((p.energy_kwh(1.0) - 8.0).abs() < 1e-9);
            let busy: Vec<usize> = (0..24).filter(|&t| p.kw_per_interval[t] > 0.0).collect();
            assert_eq!(busy.len(), 1);
            assert!((18..22).contains(&busy[0]));
            assert!((p.kw_per_interval[busy[0]] - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn oversized_need_is_clamped() {
        let fleet = FleetSpec {
            n_commercial: 0,
            n_private: 2,
            private_mileage_km: Lognormal {
                mu: 1000f64.ln(),
                sigma: 0.0,
            },
            ..FleetSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = fleet.build_load_profile(0, DayType::Weekday, 24, 1.0, &mut rng);
        assert_eq!(p.clamped_evs, 2);
        assert!((p.energy_kwh(1.0) - 2.0 * 44.0).abs() < 1e-9);
        assert!((18..22).all(|t| (p.kw_per_interval[t] - 22.0).abs() < 1e-12));
    }

    #[test]
    fn weekend_factor_scales_commercial_only() {
        let fleet = FleetSpec {
            commercial_mileage_km: Lognormal {
                mu: 80f64.ln(),
                sigma: 0.0,
            },
            private_mileage_km: Lognormal {
                mu: 40f64.ln(),
                sigma: 0.0,
            },
            ..FleetSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let wk = fleet.sample_daily_mileage(EvClass::Commercial, DayType::Weekday, &mut rng);
        let we = fleet.sample_daily_mileage(EvClass::Commercial, DayType::Weekend, &mut rng);
        assert!((we - 0.5 * wk).abs() < 1e-12);
        let pv = fleet.sample_daily_mileage(EvClass::Private, DayType::Holiday, &mut rng);
        assert!((pv - 40.0).abs() < 1e-9);
    }

    #[test]
    fn max_aggregate_load() {
        assert_eq!(FleetSpec::default().max_aggregate_kw(24), 330.0);
    }

    #[test]
    fn csv_rows() {
        let p = LoadProfile {
            day_index: 3,
            kw_per_interval: vec![0.0, 1.5],
            clamped_evs: 0,
            served_kwh: 1.5,
        };
        let mut buf = Vec::new();
        write_profiles_csv(&[p], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "day,interval,kw\n3,0,0\n3,1,1.5\n");
    }
}
