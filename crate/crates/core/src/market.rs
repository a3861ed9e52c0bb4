//! Time-of-use tariff, day calendar and the future-price sampler used by the
//! charge/discharge rewards.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, EvcsError, Result};

pub const DEFAULT_OFF_PEAK_USD_PER_KWH: f64 = 0.11;
pub const DEFAULT_PEAK_USD_PER_KWH: f64 = 0.21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
    Holiday,
}

impl DayType {
    pub fn is_workday(self) -> bool {
        self == DayType::Weekday
    }
}

/// Maps a day index to its day type. Day 0 falls on `first_weekday`
/// (0 = Monday, ..., 6 = Sunday).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calendar {
    pub first_weekday: u32,
    pub holidays: Vec<usize>,
}

impl Default for Calendar {
    /// A non-leap year starting on a Monday with New Year's Day,
    /// Independence Day and Christmas as holidays.
    fn default() -> Self {
        Calendar {
            first_weekday: 0,
            holidays: vec![0, 184, 358],
        }
    }
}

impl Calendar {
    pub fn day_type(&self, day_index: usize) -> DayType {
        if self.holidays.contains(&day_index) {
            return DayType::Holiday;
        }
        let weekday = (day_index as u64 + u64::from(self.first_weekday)) % 7;
        if weekday >= 5 {
            DayType::Weekend
        } else {
            DayType::Weekday
        }
    }
}

/// Closed interval `[start, end]` of interval indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakWindow {
    pub start: usize,
    pub end: usize,
}

impl PeakWindow {
    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSchedule {
    pub weekday_usd_per_kwh: Vec<f64>,
    pub weekend_usd_per_kwh: Vec<f64>,
    pub holiday_usd_per_kwh: Vec<f64>,
    /// `None` disables the peak penalty entirely.
    pub peak: Option<PeakWindow>,
    pub calendar: Calendar,
}

impl PriceSchedule {
    /// Two-level weekday tariff peaking 15:00-19:00; weekends and holidays
    /// are off-peak all day. Hourly intervals.
    pub fn default_tou() -> Self {
        let peak = PeakWindow { start: 15, end: 18 };
        let weekday = (0..24)
            .map(|t| {
                if peak.contains(t) {
                    DEFAULT_PEAK_USD_PER_KWH
                } else {
                    DEFAULT_OFF_PEAK_USD_PER_KWH
                }
            })
            .collect();
        PriceSchedule {
            weekday_usd_per_kwh: weekday,
            weekend_usd_per_kwh: vec![DEFAULT_OFF_PEAK_USD_PER_KWH; 24],
            holiday_usd_per_kwh: vec![DEFAULT_OFF_PEAK_USD_PER_KWH; 24],
            peak: Some(peak),
            calendar: Calendar::default(),
        }
    }

    /// The same price in every interval of every day.
    pub fn flat(price: f64, intervals: usize) -> Self {
        PriceSchedule {
            weekday_usd_per_kwh: vec![price; intervals],
            weekend_usd_per_kwh: vec![price; intervals],
            holiday_usd_per_kwh: vec![price; intervals],
            peak: None,
            calendar: Calendar::default(),
        }
    }

    pub fn validate(&self, intervals: usize) -> Result<()> {
        for (key, prices) in [
            ("market.weekday_usd_per_kwh", &self.weekday_usd_per_kwh),
            ("market.weekend_usd_per_kwh", &self.weekend_usd_per_kwh),
            ("market.holiday_usd_per_kwh", &self.holiday_usd_per_kwh),
        ] {
            ensure(prices.len() == intervals, key, || {
                format!("expected {intervals} prices, got {}", prices.len())
            })?;
            ensure(prices.iter().all(|p| p.is_finite() && *p > 0.0), key, || {
                "all prices must be positive".into()
            })?;
        }
        if let Some(w) = self.peak {
            ensure(w.start <= w.end && w.end < intervals, "market.peak_start", || {
                format!(
                    "peak window [{}, {}] must satisfy start <= end < {intervals}",
                    w.start, w.end
                )
            })?;
        }
        ensure(self.calendar.first_weekday < 7, "market.first_weekday", || {
            "must be 0 (Monday) through 6 (Sunday)".into()
        })?;
        Ok(())
    }

    pub fn intervals(&self) -> usize {
        self.weekday_usd_per_kwh.len()
    }

    pub fn day_type(&self, day_index: usize) -> DayType {
        self.calendar.day_type(day_index)
    }

    pub fn day_prices(&self, day_index: usize) -> &[f64] {
        match self.day_type(day_index) {
            DayType::Weekday => &self.weekday_usd_per_kwh,
            DayType::Weekend => &self.weekend_usd_per_kwh,
            DayType::Holiday => &self.holiday_usd_per_kwh,
        }
    }

    pub fn price_at(&self, day_index: usize, t: usize) -> Result<f64> {
        let prices = self.day_prices(day_index);
        prices
            .get(t)
            .copied()
            .ok_or(EvcsError::IntervalOutOfRange { t, len: prices.len() })
    }

    pub fn is_peak(&self, t: usize) -> bool {
        self.peak.is_some_and(|w| w.contains(t))
    }

    /// Price of an interval drawn uniformly from `t..intervals` of the same day.
    pub fn future_price_sample<R: Rng + ?Sized>(&self, day_index: usize, t: usize, rng: &mut R) -> f64 {
        let prices = self.day_prices(day_index);
        debug_assert!(t < prices.len());
        prices[rng.random_range(t..prices.len())]
    }

    pub fn min_price(&self) -> f64 {
        self.all_prices().fold(f64::INFINITY, f64::min)
    }

    pub fn max_price(&self) -> f64 {
        self.all_prices().fold(f64::NEG_INFINITY, f64::max)
    }

    fn all_prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.weekday_usd_per_kwh
            .iter()
            .chain(&self.weekend_usd_per_kwh)
            .chain(&self.holiday_usd_per_kwh)
            .copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_lookup() {
        let s = PriceSchedule::default_tou();
        s.validate(24).unwrap();
        assert_eq!(s.price_at(1, 16).unwrap(), 0.21);
        assert_eq!(s.price_at(1, 3).unwrap(), 0.11);
        assert_eq!(s.price_at(5, 16).unwrap(), 0.11, "saturday is off-peak");
        assert!(matches!(
            s.price_at(1, 24),
            Err(EvcsError::IntervalOutOfRange { t: 24, len: 24 })
        ));
        let flat = PriceSchedule::flat(0.15, 24);
        assert!((0..24).all(|t| flat.price_at(3, t).unwrap() == 0.15));
    }

    #[test]
    fn peak_window_is_closed() {
        let s = PriceSchedule::default_tou();
        assert!(s.is_peak(15));
        assert!(s.is_peak(18));
        assert!(!s.is_peak(14));
        assert!(!s.is_peak(19));
        let argmax = (0..24)
            .max_by(|a, b| s.weekday_usd_per_kwh[*a].total_cmp(&s.weekday_usd_per_kwh[*b]))
            .unwrap();
        assert!(s.is_peak(argmax));
        assert!(!PriceSchedule::flat(0.1, 24).is_peak(12));
    }

    #[test]
    fn calendar_day_types() {
        let c = Calendar::default();
        assert_eq!(c.day_type(0), DayType::Holiday);
        assert_eq!(c.day_type(1), DayType::Weekday);
        assert_eq!(c.day_type(5), DayType::Weekend);
        assert_eq!(c.day_type(6), DayType::Weekend);
        assert_eq!(c.day_type(7), DayType::Weekday);
        assert_eq!(c.day_type(184), DayType::Holiday);
    }

    #[test]
    fn future_sample_last_interval_and_flat() {
        let s = PriceSchedule::default_tou();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(s.future_price_sample(1, 23, &mut rng), s.weekday_usd_per_kwh[23]);
        }
        let flat = PriceSchedule::flat(0.3, 24);
        assert!((0..100).all(|_| flat.future_price_sample(2, 0, &mut rng) == 0.3));
    }

    #[test]
    fn future_sample_mean_matches_day_mean() {
        let s = PriceSchedule::default_tou();
        let day_mean = s.weekday_usd_per_kwh.iter().sum::<f64>() / 24.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean = (0..n).map(|_| s.future_price_sample(1, 0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - day_mean).abs() <= 0.01 * day_mean, "{mean} vs {day_mean}");
    }

    #[test]
    fn validation_rejects_bad_schedules() {
        let mut s = PriceSchedule::default_tou();
        s.weekday_usd_per_kwh[3] = 0.0;
        assert!(s.validate(24).is_err());
        let mut s = PriceSchedule::default_tou();
        s.peak = Some(PeakWindow { start: 20, end: 24 });
        assert!(s.validate(24).is_err());
        assert!(PriceSchedule::default_tou().validate(48).is_err());
    }
}
