//! Synthetic fleets and price curves.

use lyapcharge::model::{Ev, EvId, GroupId, PriceSeries, Scenario, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::run::ALPHA_SCALE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("target SOC {target} is below the largest initial SOC {soc_max}")]
    TargetBelowInitial { target: f64, soc_max: f64 },
    #[error("invalid generator parameter: {0}")]
    Invalid(&'static str),
    #[error("parking time of {hours} h does not fit a {day_hours} h day")]
    ParkingTooLong { hours: f64, day_hours: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceModel {
    /// Smooth daily curve with a midday solar dip and an evening ramp,
    /// jittered multiplicatively by `jitter`.
    Duck { jitter: f64 },
    /// Independent uniform draws per slot, USD/kWh.
    Iid { low: f64, high: f64 },
}

impl Default for PriceModel {
    fn default() -> Self {
        PriceModel::Duck { jitter: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    /// EVs arriving per day.
    pub evs: usize,
    pub days: usize,
    pub slot_minutes: f64,
    pub eta: f64,
    pub arrival_peak_h: f64,
    pub arrival_sd_h: f64,
    /// Allowed parking durations; EVs sharing one form a group.
    pub parking_h: Vec<f64>,
    pub soc_min: f64,
    pub soc_max: f64,
    pub target_soc: f64,
    pub p_min_kw: f64,
    pub p_max_kw: f64,
    pub cap_min_kwh: f64,
    pub cap_max_kwh: f64,
    pub prices: PriceModel,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            evs: 100,
            days: 1,
            slot_minutes: 5.0,
            eta: 0.95,
            arrival_peak_h: 8.0,
            arrival_sd_h: 1.0,
            parking_h: vec![8.0, 10.0],
            soc_min: 0.25,
            soc_max: 0.8,
            target_soc: 0.8,
            p_min_kw: 150.0,
            p_max_kw: 350.0,
            cap_min_kwh: 300.0,
            cap_max_kwh: 600.0,
            prices: PriceModel::default(),
        }
    }
}

impl GeneratorParams {
    /// Twenty days with i.i.d. prices and the same daily arrival pattern.
    pub fn stationary(evs_per_day: usize) -> Self {
        Self {
            evs: evs_per_day,
            days: 20,
            prices: PriceModel::Iid { low: 0.02, high: 0.08 },
            ..Self::default()
        }
    }

    pub fn slots_per_day(&self) -> usize {
        (24.0 * 60.0 / self.slot_minutes).round() as usize
    }

    pub fn num_slots(&self) -> usize {
        self.slots_per_day() * self.days
    }

    pub fn slot_hours(&self) -> f64 {
        self.slot_minutes / 60.0
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let ordered = 0.0 <= self.soc_min && self.soc_min <= self.soc_max && self.target_soc <= 1.0;
        if !ordered {
            return Err(GenError::Invalid("need 0 <= soc_min <= soc_max and target_soc <= 1"));
        }
        if self.target_soc < self.soc_max {
            return Err(GenError::TargetBelowInitial {
                target: self.target_soc,
                soc_max: self.soc_max,
            });
        }
        if self.evs == 0 || self.days == 0 {
            return Err(GenError::Invalid("evs and days must be positive"));
        }
        if !(self.slot_minutes > 0.0 && 1440.0 % self.slot_minutes == 0.0) {
            return Err(GenError::Invalid("slot_minutes must divide a day"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(GenError::Invalid("eta must lie in (0, 1]"));
        }
        if !(0.0 < self.p_min_kw && self.p_min_kw <= self.p_max_kw) {
            return Err(GenError::Invalid("need 0 < p_min_kw <= p_max_kw"));
        }
        if !(0.0 < self.cap_min_kwh && self.cap_min_kwh <= self.cap_max_kwh) {
            return Err(GenError::Invalid("need 0 < cap_min_kwh <= cap_max_kwh"));
        }
        if self.parking_h.is_empty() || self.arrival_sd_h < 0.0 {
            return Err(GenError::Invalid(
                "parking_h must be non-empty and arrival_sd_h non-negative",
            ));
        }
        for &hours in &self.parking_h {
            if !(hours > 0.0 && hours < 24.0) {
                return Err(GenError::ParkingTooLong { hours, day_hours: 24.0 });
            }
        }
        if let PriceModel::Iid { low, high } = self.prices {
            if low > high {
                return Err(GenError::Invalid("iid price bounds are reversed"));
            }
        }
        Ok(())
    }
}

/// Duck-shaped daily price in USD/kWh at hour-of-day `h`.
pub fn duck_price(h: f64) -> f64 {
    let bump = |centre: f64, width: f64| (-((h - centre) / width).powi(2)).exp();
    0.045 + 0.015 * bump(7.5, 1.5) - 0.035 * bump(13.0, 2.5) + 0.08 * bump(19.0, 1.5)
}

pub fn generate_prices(p: &GeneratorParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dt = p.slot_hours();
    (0..p.num_slots())
        .map(|t| match p.prices {
            PriceModel::Duck { jitter } => {
                let h = (t as f64 * dt) % 24.0;
                duck_price(h) * (1.0 + jitter * (2.0 * rng.random::<f64>() - 1.0))
            }
            PriceModel::Iid { low, high } => rng.random_range(low..=high),
        })
        .collect()
}

/// Draws a fleet with a morning arrival peak. Each EV's departure is its
/// arrival plus a parking time drawn from `parking_h`.
pub fn generate_fleet(p: &GeneratorParams, rng: &mut ChaCha8Rng) -> Result<Vec<Ev<f64>>, GenError> {
    p.validate()?;
    let dt = p.slot_hours();
    let per_day = p.slots_per_day();
    let arrival = Normal::new(p.arrival_peak_h, p.arrival_sd_h).map_err(|_| GenError::Invalid("arrival spread"))?;
    let mut fleet = Vec::with_capacity(p.evs * p.days);
    for day in 0..p.days {
        for _ in 0..p.evs {
            let group = rng.random_range(0..p.parking_h.len());
            let parking = (p.parking_h[group] / dt).round() as usize;
            let latest = per_day - parking;
            let slot = (arrival.sample(rng) / dt).round().clamp(0.0, latest as f64) as usize;
            let e_cap = rng.random_range(p.cap_min_kwh..=p.cap_max_kwh);
            let soc0 = if p.soc_min < p.soc_max {
                rng.random_range(p.soc_min..p.soc_max)
            } else {
                p.soc_min
            };
            let p_max = rng.random_range(p.p_min_kw..=p.p_max_kw);
            let start = day * per_day + slot;
            fleet.push(Ev {
                id: EvId(fleet.len() as u32),
                group_id: GroupId(group as u32),
                p_max,
                e_req: ((p.target_soc - soc0) * e_cap).max(1e-3),
                e_max: (1.0 - soc0) * e_cap,
                e_cap,
                arrival_slot: start,
                departure_slot: start + parking,
            });
        }
    }
    Ok(fleet)
}

/// Fleet and prices from one seed. Groups are formed by parking time; `alpha`
/// is in user units (MW per period).
pub fn generate_scenario(p: &GeneratorParams, seed: u64, w: usize, alpha: f64) -> Result<Scenario<f64>, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fleet = generate_fleet(p, &mut rng)?;
    let prices = generate_prices(p, &mut rng);
    let prices = PriceSeries::new(prices).map_err(|_| GenError::Invalid("empty horizon"))?;
    Ok(Scenario::new(
        TimeGrid::new(p.num_slots(), p.slot_hours()),
        fleet,
        prices,
        p.eta,
        w,
        alpha * ALPHA_SCALE,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lyapcharge::validate_scenario;

    #[test]
    fn defaults_give_a_valid_day() {
        let s = generate_scenario(&GeneratorParams::default(), 1, 5, 1.0).unwrap();
        assert_eq!(s.num_slots(), 288);
        assert_eq!(s.eta, 0.95);
        assert_eq!(s.fleet.len(), 100);
        assert!(s.groups.len() <= 2);
        assert!(validate_scenario(&s).is_empty());
        for ev in &s.fleet {
            assert!((150.0..=350.0).contains(&ev.p_max));
            assert!(ev.e_req > 0.0 && ev.e_req <= ev.e_max && ev.e_max <= ev.e_cap);
            let soc0 = 1.0 - ev.e_max / ev.e_cap;
            assert!((0.25..0.8).contains(&soc0));
        }
    }

    #[test]
    fn same_seed_same_fleet() {
        let p = GeneratorParams::default();
        let a = generate_scenario(&p, 9, 5, 1.0).unwrap();
        let b = generate_scenario(&p, 9, 5, 1.0).unwrap();
        let c = generate_scenario(&p, 10, 5, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.fleet, c.fleet);
    }

    #[test]
    fn target_below_initial_is_rejected() {
        let p = GeneratorParams {
            target_soc: 0.7,
            ..GeneratorParams::default()
        };
        assert!(matches!(
            generate_scenario(&p, 1, 1, 1.0),
            Err(GenError::TargetBelowInitial { .. })
        ));
    }

    #[test]
    fn stationary_horizon() {
        let s = generate_scenario(&GeneratorParams::stationary(10), 3, 1, 1.0).unwrap();
        assert_eq!(s.num_slots(), 5760);
        assert_eq!(s.fleet.len(), 200);
        assert!(validate_scenario(&s).is_empty());
        assert!(s.prices.prices().iter().all(|p| (0.02..=0.08).contains(p)));
    }

    #[test]
    fn duck_curve_shape() {
        assert!(duck_price(13.0) < duck_price(3.0));
        assert!(duck_price(19.0) > 2.0 * duck_price(3.0));
        assert!(duck_price(13.0) > 0.0);
    }
}
