//! Receding-horizon baseline: each slot, minimize window cost per EV subject
//! to deadlines that fall inside the window, then apply the first step.

use crate::model::{Ev, Scenario};
use crate::scalar::Scalar;

/// Battery energy of every EV, kWh, by fleet index.
#[derive(Clone, Debug, PartialEq)]
pub struct MpcState<S> {
    pub energy: Vec<S>,
    /// EVs whose remaining requirement no longer fits before departure.
    pub missed: Vec<bool>,
}

impl<S: Scalar> MpcState<S> {
    pub fn new(s: &Scenario<S>) -> Self {
        Self {
            energy: s.fleet.iter().map(Ev::e_initial).collect(),
            missed: vec![false; s.fleet.len()],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpcPlan<S> {
    pub base_slot: usize,
    pub horizon: usize,
    /// Power per fleet index and window offset, kW.
    pub power: Vec<Vec<S>>,
    /// Fleet indices newly found unable to meet their deadline.
    pub missed: Vec<usize>,
}

impl<S: Scalar> MpcPlan<S> {
    /// First-step powers.
    pub fn first_step(&self) -> Vec<S> {
        self.power
            .iter()
            .map(|p| p.first().copied().unwrap_or_else(S::zero))
            .collect()
    }
}

/// Cheapest window plan of one EV; the flag is set when its deadline falls
/// inside the window and cannot be met, in which case it charges flat out.
pub fn mpc_ev_window<S: Scalar>(ev: &Ev<S>, energy: S, t: usize, prices: &[S], eta: S, dt: S) -> (Vec<S>, bool) {
    let h = prices.len();
    let mut power = vec![S::zero(); h];
    let slots: Vec<usize> = (0..h).filter(|&tau| ev.is_active(t + tau)).collect();
    if slots.is_empty() {
        return (power, false);
    }
    let per_slot = ev.p_max * eta * dt;
    let mut headroom = (ev.e_cap - energy).pos();
    let deadline = ev.departure_slot <= t + h;
    let mut need = if deadline {
        (ev.e_initial() + ev.e_req - energy).pos()
    } else {
        S::zero()
    };
    let reachable = S::of(slots.len()) * per_slot;
    if deadline && !need.le_tol(reachable.min_of(headroom)) {
        for &tau in &slots {
            let take = per_slot.min_of(headroom);
            power[tau] = take / (eta * dt);
            headroom -= take;
        }
        return (power, true);
    }
    let mut order = slots;
    order.sort_by(|&a, &b| {
        prices[a]
            .partial_cmp(&prices[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for tau in order {
        let take = if prices[tau] < S::zero() {
            per_slot.min_of(headroom)
        } else if need > S::zero() {
            per_slot.min_of(need).min_of(headroom)
        } else {
            break;
        };
        power[tau] = take / (eta * dt);
        headroom -= take;
        need = (need - take).pos();
    }
    (power, false)
}

/// Window plan for every EV present in slots `t..t + prices.len()`.
pub fn plan_mpc<S: Scalar>(s: &Scenario<S>, state: &MpcState<S>, t: usize, prices: &[S]) -> MpcPlan<S> {
    let h = prices.len();
    let mut missed = Vec::new();
    let power = s
        .fleet
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            if ev.departure_slot <= t || ev.arrival_slot >= t + h {
                return vec![S::zero(); h];
            }
            let (p, infeasible) = mpc_ev_window(ev, state.energy[i], t, prices, s.eta, s.dt());
            if infeasible && !state.missed[i] {
                missed.push(i);
            }
            p
        })
        .collect();
    MpcPlan {
        base_slot: t,
        horizon: h,
        power,
        missed,
    }
}

/// Applies the first step of `plan` and records missed deadlines.
pub fn apply_first_step<S: Scalar>(s: &Scenario<S>, state: &mut MpcState<S>, plan: &MpcPlan<S>) -> Vec<S> {
    let step = plan.first_step();
    let scale = s.eta * s.dt();
    for (e, &p) in state.energy.iter_mut().zip(&step) {
        *e += p * scale;
    }
    for &i in &plan.missed {
        state.missed[i] = true;
    }
    step
}

/// Window cost Σ_τ π(t+τ)·p(τ)·Δt of one EV's plan.
pub fn mpc_cost<S: Scalar>(power: &[S], prices: &[S], dt: S) -> S {
    power
        .iter()
        .zip(prices)
        .fold(S::zero(), |acc, (&p, &pi)| acc + p * pi * dt)
}
