//! Per-EV demand profiles a_v(t) and their group aggregates a_g(t).
//!
//! An EV's requirement h = E_req/(ηΔt) (kW·slots) arrives as a block at full
//! power: `P_v` in each of the first `T_min = ⌊h/P_v⌋` slots after arrival and
//! the remainder `h − T_min·P_v` in the slot after that. The total therefore
//! equals `h` exactly.

use thiserror::Error;

use crate::model::{Ev, EvId, GroupId, ModelError, Scenario};
use crate::scalar::{max_elem, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("demand of {ev} runs to slot {last_slot}, past the {num_slots}-slot horizon")]
    Overflow {
        ev: EvId,
        last_slot: usize,
        num_slots: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Non-zero stretch of one EV's demand.
#[derive(Clone, Debug, PartialEq)]
pub struct EvDemand<S> {
    pub start: usize,
    pub values: Vec<S>,
    /// Running totals of `values`.
    prefix: Vec<S>,
}

impl<S: Scalar> EvDemand<S> {
    fn new(start: usize, values: Vec<S>) -> Self {
        let mut acc = S::zero();
        let prefix = values
            .iter()
            .map(|&v| {
                acc += v;
                acc
            })
            .collect();
        Self { start, values, prefix }
    }

    pub fn at(&self, t: usize) -> S {
        t.checked_sub(self.start)
            .and_then(|i| self.values.get(i).copied())
            .unwrap_or_else(S::zero)
    }

    /// Σ_{s ≤ t} a_v(s).
    pub fn arrived_through(&self, t: usize) -> S {
        match t.checked_sub(self.start) {
            None => S::zero(),
            Some(i) if i < self.prefix.len() => self.prefix[i],
            Some(_) => self.total(),
        }
    }

    pub fn total(&self) -> S {
        self.prefix.last().copied().unwrap_or_else(S::zero)
    }

    /// Last slot carrying positive demand.
    pub fn end_slot(&self) -> usize {
        let len = self.values.iter().rposition(|v| *v > S::zero()).map_or(0, |i| i + 1);
        (self.start + len).saturating_sub(1).max(self.start)
    }

    /// Earliest slot whose demand is not fully covered by `served`.
    pub fn oldest_unserved(&self, served: S) -> Option<usize> {
        self.prefix
            .iter()
            .position(|&p| p > served + S::tolerance())
            .map(|i| self.start + i)
    }

    pub fn dense(&self, num_slots: usize) -> Vec<S> {
        (0..num_slots).map(|t| self.at(t)).collect()
    }
}

/// ⌊E_req/(P_v·η·Δt)⌋.
pub fn t_min<S: Scalar>(ev: &Ev<S>, eta: S, dt: S) -> usize {
    (ev.req_units(eta, dt) / ev.p_max).floor().to_usize().unwrap_or(0)
}

/// Dense demand profile of one EV over `num_slots` slots.
pub fn demand_profile<S: Scalar>(ev: &Ev<S>, eta: S, dt: S, num_slots: usize) -> Result<Vec<S>, DemandError> {
    Ok(ev_demand(ev, eta, dt, num_slots)?.dense(num_slots))
}

fn ev_demand<S: Scalar>(ev: &Ev<S>, eta: S, dt: S, num_slots: usize) -> Result<EvDemand<S>, DemandError> {
    let full = t_min(ev, eta, dt);
    let tail = ev.req_units(eta, dt) - S::of(full) * ev.p_max;
    let mut values = vec![ev.p_max; full];
    if tail > S::zero() {
        values.push(tail);
    }
    let last_slot = ev.arrival_slot + values.len().max(1) - 1;
    if last_slot >= num_slots {
        return Err(DemandError::Overflow {
            ev: ev.id,
            last_slot,
            num_slots,
        });
    }
    Ok(EvDemand::new(ev.arrival_slot, values))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemandProfile<S> {
    pub per_ev: Vec<EvDemand<S>>,
    /// a_g(t), indexed like [`Scenario::groups`].
    pub per_group: Vec<Vec<S>>,
    pub group_ids: Vec<GroupId>,
    pub t_min: Vec<usize>,
    /// EVs whose demand block ends at or after departure. These are reported,
    /// not rejected.
    pub late_demand: Vec<EvId>,
}

impl<S: Scalar> DemandProfile<S> {
    pub fn build(s: &Scenario<S>) -> Result<Self, DemandError> {
        let (eta, dt, horizon) = (s.eta, s.dt(), s.num_slots());
        let per_ev = s
            .fleet
            .iter()
            .map(|ev| ev_demand(ev, eta, dt, horizon))
            .collect::<Result<Vec<_>, _>>()?;
        let per_group = s
            .groups
            .iter()
            .map(|g| {
                let mut total = vec![S::zero(); horizon];
                for &i in &g.members {
                    let d = &per_ev[i];
                    for (k, &v) in d.values.iter().enumerate() {
                        total[d.start + k] += v;
                    }
                }
                total
            })
            .collect();
        let late_demand = s
            .fleet
            .iter()
            .zip(&per_ev)
            .filter(|(ev, d)| d.end_slot() >= ev.departure_slot)
            .map(|(ev, _)| ev.id)
            .collect();
        Ok(Self {
            t_min: s.fleet.iter().map(|ev| t_min(ev, eta, dt)).collect(),
            per_ev,
            per_group,
            group_ids: s.groups.iter().map(|g| g.id).collect(),
            late_demand,
        })
    }

    /// A_g for every group.
    pub fn a_bounds(&self) -> Vec<S> {
        self.per_group
            .iter()
            .map(|d| max_elem(d).unwrap_or_else(S::zero))
            .collect()
    }
}

/// a_g(t) for one group.
pub fn group_demand<S: Scalar>(profile: &DemandProfile<S>, g: GroupId) -> Result<&[S], DemandError> {
    profile
        .group_ids
        .iter()
        .position(|&id| id == g)
        .map(|i| profile.per_group[i].as_slice())
        .ok_or(DemandError::Model(ModelError::UnknownGroup(g)))
}

/// Builds the demand profile and returns the scenario with A_g attached.
pub fn attach_demand<S: Scalar>(s: Scenario<S>) -> Result<(Scenario<S>, DemandProfile<S>), DemandError> {
    let profile = DemandProfile::build(&s)?;
    let s = s.with_demand_bounds(&profile.per_group);
    Ok((s, profile))
}
