//! Greedy and offline reference schedules.

use thiserror::Error;

use crate::flow::ServiceLedger;
use crate::model::{GroupId, Scenario};
use crate::scalar::Scalar;

/// Charge every parked EV as fast as it can until its requirement is met.
pub fn plan_greedy<S: Scalar>(s: &Scenario<S>, t: usize, ledger: &ServiceLedger<S>) -> Vec<S> {
    let (eta, dt) = (s.eta, s.dt());
    s.groups
        .iter()
        .map(|g| {
            g.members
                .iter()
                .filter(|&&i| s.fleet[i].is_active(t))
                .fold(S::zero(), |acc, &i| {
                    let ev = &s.fleet[i];
                    let remaining = (ev.req_units(eta, dt) - ledger.served[i]).pos();
                    acc + ev.slot_cap(eta, dt).min_of(remaining)
                })
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{group} can absorb {capacity} kW·slots but needs {required}")]
pub struct InfeasibleScenario {
    pub group: GroupId,
    pub capacity: f64,
    pub required: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineSchedule<S> {
    /// Power per group and slot, kW.
    pub x: Vec<Vec<S>>,
    /// Δt·Σ_t π(t)·Σ_g x_g(t), USD.
    pub cost: S,
}

/// Exact minimizer of the aggregate full-horizon problem: fill the cheapest
/// slots to their caps until each group's requirement is met, then take
/// every remaining negative-price slot up to the group's energy ceiling.
pub fn offline_p2<S: Scalar>(s: &Scenario<S>) -> Result<OfflineSchedule<S>, InfeasibleScenario> {
    offline_with_prices(s, s.prices.prices())
}

/// As [`offline_p2`] with an explicit price vector.
pub fn offline_with_prices<S: Scalar>(s: &Scenario<S>, prices: &[S]) -> Result<OfflineSchedule<S>, InfeasibleScenario> {
    let horizon = s.num_slots();
    let (eta, dt) = (s.eta, s.dt());
    let mut order: Vec<usize> = (0..horizon).collect();
    order.sort_by(|&a, &b| {
        prices[a]
            .partial_cmp(&prices[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut x = Vec::with_capacity(s.groups.len());
    for (gi, g) in s.groups.iter().enumerate() {
        let caps = s.cap_series(gi);
        let (need, ceiling) = g.members.iter().fold((S::zero(), S::zero()), |(lo, hi), &i| {
            let ev = &s.fleet[i];
            (lo + ev.req_units(eta, dt), hi + ev.max_units(eta, dt))
        });
        let capacity = caps.iter().fold(S::zero(), |acc, &c| acc + c);
        if !need.le_tol(capacity) {
            return Err(InfeasibleScenario {
                group: g.id,
                capacity: capacity.as_f64(),
                required: need.as_f64(),
            });
        }
        let mut row = vec![S::zero(); horizon];
        let mut total = S::zero();
        for &t in &order {
            let limit = if prices[t] < S::zero() { ceiling } else { need };
            if total >= limit {
                if prices[t] >= S::zero() {
                    break;
                }
                continue;
            }
            let take = caps[t].min_of(limit - total);
            row[t] = take;
            total += take;
        }
        x.push(row);
    }
    let cost = schedule_cost(&x, s.prices.prices(), dt);
    Ok(OfflineSchedule { x, cost })
}

/// Δt·Σ_t π(t)·Σ_g x_g(t).
pub fn schedule_cost<S: Scalar>(x: &[Vec<S>], prices: &[S], dt: S) -> S {
    x.iter().fold(S::zero(), |acc, row| {
        row.iter().zip(prices).fold(acc, |acc, (&xt, &pi)| acc + pi * xt * dt)
    })
}
