//! Time grid, fleet, groups and prices.
//!
//! Slots are 0-based: slot `t` covers `[t·Δt, (t+1)·Δt)`. An EV can charge in
//! the slots `arrival_slot..departure_slot`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{max_elem, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u32);

impl fmt::Display for EvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ev {}", self.0)
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "group {}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown {0}")]
    UnknownGroup(GroupId),
    #[error("unknown {0}")]
    UnknownEv(EvId),
    #[error("slot {slot} outside grid of {num_slots} slots")]
    SlotOutOfRange { slot: usize, num_slots: usize },
    #[error("price series is empty")]
    EmptyPrices,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<S> {
    pub num_slots: usize,
    /// Slot length Δt in hours.
    pub slot_hours: S,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(num_slots: usize, slot_hours: S) -> Self {
        Self { num_slots, slot_hours }
    }
}

/// Static parameters of one vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct Ev<S> {
    pub id: EvId,
    pub group_id: GroupId,
    /// Charger power limit P_v in kW.
    pub p_max: S,
    /// Energy that must be delivered before departure, kWh.
    pub e_req: S,
    /// Energy that may be delivered at most, kWh.
    pub e_max: S,
    /// Battery capacity, kWh.
    pub e_cap: S,
    pub arrival_slot: usize,
    pub departure_slot: usize,
}

impl<S: Scalar> Ev<S> {
    pub fn is_active(&self, t: usize) -> bool {
        self.arrival_slot <= t && t < self.departure_slot
    }

    /// Number of chargeable slots |𝒰_v|.
    pub fn parking_slots(&self) -> usize {
        self.departure_slot.saturating_sub(self.arrival_slot)
    }

    /// Required energy expressed in kW·slots, E_req/(ηΔt).
    pub fn req_units(&self, eta: S, dt: S) -> S {
        self.e_req / (eta * dt)
    }

    /// Maximum energy expressed in kW·slots, E_max/(ηΔt).
    pub fn max_units(&self, eta: S, dt: S) -> S {
        self.e_max / (eta * dt)
    }

    /// Per-slot power limit min{E_max/(ηΔt), P_v}.
    pub fn slot_cap(&self, eta: S, dt: S) -> S {
        self.max_units(eta, dt).min_of(self.p_max)
    }

    /// Energy level on arrival, E_cap − E_max.
    pub fn e_initial(&self) -> S {
        self.e_cap - self.e_max
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Group<S> {
    pub id: GroupId,
    /// Common parking duration R_g in slots.
    pub parking_slots: usize,
    /// Indices into [`Scenario::fleet`].
    pub members: Vec<usize>,
    /// Delay weight α_g.
    pub alpha: S,
    /// X_g = Σ P_v over members.
    pub x_cap_total: S,
    /// Per-slot demand bound A_g. Zero until demand bounds are attached.
    pub a_bound: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries<S> {
    prices: Vec<S>,
    pi_max: S,
}

impl<S: Scalar> PriceSeries<S> {
    pub fn new(prices: Vec<S>) -> Result<Self, ModelError> {
        let pi_max = max_elem(&prices).ok_or(ModelError::EmptyPrices)?;
        Ok(Self { prices, pi_max })
    }

    pub fn prices(&self) -> &[S] {
        &self.prices
    }

    pub fn pi_max(&self) -> S {
        self.pi_max
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn at(&self, t: usize) -> S {
        self.prices[t]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<S> {
    pub grid: TimeGrid<S>,
    pub fleet: Vec<Ev<S>>,
    pub groups: Vec<Group<S>>,
    pub prices: PriceSeries<S>,
    /// Charging efficiency η.
    pub eta: S,
    /// Lookahead window w.
    pub lookahead: usize,
}

impl<S: Scalar> Scenario<S> {
    /// Builds a scenario, forming groups from each EV's `group_id`. Groups are
    /// ordered by id and share the delay weight `alpha`.
    pub fn new(
        grid: TimeGrid<S>,
        fleet: Vec<Ev<S>>,
        prices: PriceSeries<S>,
        eta: S,
        lookahead: usize,
        alpha: S,
    ) -> Self {
        let mut by_id: BTreeMap<GroupId, Vec<usize>> = BTreeMap::new();
        for (idx, ev) in fleet.iter().enumerate() {
            by_id.entry(ev.group_id).or_default().push(idx);
        }
        let groups = by_id
            .into_iter()
            .map(|(id, members)| {
                let parking_slots = fleet[members[0]].parking_slots();
                let x_cap_total = members.iter().fold(S::zero(), |acc, &i| acc + fleet[i].p_max);
                Group {
                    id,
                    parking_slots,
                    members,
                    alpha,
                    x_cap_total,
                    a_bound: S::zero(),
                }
            })
            .collect();
        Self {
            grid,
            fleet,
            groups,
            prices,
            eta,
            lookahead,
        }
    }

    pub fn num_slots(&self) -> usize {
        self.grid.num_slots
    }

    pub fn dt(&self) -> S {
        self.grid.slot_hours
    }

    pub fn group_index(&self, id: GroupId) -> Result<usize, ModelError> {
        self.groups
            .iter()
            .position(|g| g.id == id)
            .ok_or(ModelError::UnknownGroup(id))
    }

    pub fn group(&self, id: GroupId) -> Result<&Group<S>, ModelError> {
        self.group_index(id).map(|i| &self.groups[i])
    }

    pub fn ev_index(&self, id: EvId) -> Result<usize, ModelError> {
        self.fleet
            .iter()
            .position(|ev| ev.id == id)
            .ok_or(ModelError::UnknownEv(id))
    }

    /// Replace every group's delay weight.
    pub fn with_alpha(mut self, alpha: S) -> Self {
        for g in &mut self.groups {
            g.alpha = alpha;
        }
        self
    }

    pub fn with_lookahead(mut self, w: usize) -> Self {
        self.lookahead = w;
        self
    }

    /// Store A_g = max_t a_g(t) for every group.
    pub fn with_demand_bounds(mut self, per_group_demand: &[Vec<S>]) -> Self {
        for (g, demand) in self.groups.iter_mut().zip(per_group_demand) {
            g.a_bound = max_elem(demand).unwrap_or_else(S::zero);
        }
        self
    }

    /// Per-slot power limit of group `g_idx` over the whole horizon.
    pub fn cap_series(&self, g_idx: usize) -> Vec<S> {
        let (eta, dt) = (self.eta, self.dt());
        let mut caps = vec![S::zero(); self.num_slots()];
        for &i in &self.groups[g_idx].members {
            let ev = &self.fleet[i];
            let cap = ev.slot_cap(eta, dt);
            let end = ev.departure_slot.min(caps.len());
            for c in &mut caps[ev.arrival_slot.min(end)..end] {
                *c += cap;
            }
        }
        caps
    }
}

/// Σ over EVs of `g` active at `t` of min{E_max/(ηΔt), P_v}.
pub fn group_power_cap<S: Scalar>(s: &Scenario<S>, g: GroupId, t: usize) -> Result<S, ModelError> {
    if t >= s.num_slots() {
        return Err(ModelError::SlotOutOfRange {
            slot: t,
            num_slots: s.num_slots(),
        });
    }
    let group = s.group(g)?;
    Ok(group
        .members
        .iter()
        .map(|&i| &s.fleet[i])
        .filter(|ev| ev.is_active(t))
        .fold(S::zero(), |acc, ev| acc + ev.slot_cap(s.eta, s.dt())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Grid,
    Prices,
    Scenario,
    Ev(EvId),
    Group(GroupId),
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Grid => f.write_str("time grid"),
            Entity::Prices => f.write_str("price series"),
            Entity::Scenario => f.write_str("scenario"),
            Entity::Ev(id) => write!(f, "{id}"),
            Entity::Group(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub entity: Entity,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

/// Checks every structural invariant, returning one entry per broken rule.
pub fn validate_scenario<S: Scalar>(s: &Scenario<S>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |entity: Entity, rule: &str| {
        out.push(Violation {
            entity,
            rule: rule.to_string(),
        })
    };
    let zero = S::zero();

    if s.grid.num_slots == 0 {
        flag(Entity::Grid, "num_slots must be at least 1");
    }
    if s.grid.slot_hours <= zero {
        flag(Entity::Grid, "slot_hours must be positive");
    }

    for ev in &s.fleet {
        let e = Entity::Ev(ev.id);
        if !(ev.e_req > zero && ev.e_req <= ev.e_max && ev.e_max <= ev.e_cap) {
            flag(e, "requires 0 < e_req <= e_max <= e_cap");
        }
        if ev.arrival_slot >= ev.departure_slot {
            flag(e, "arrival_slot must precede departure_slot");
        }
        if ev.departure_slot > s.grid.num_slots {
            flag(e, "departure_slot lies beyond the horizon");
        }
        if ev.p_max <= zero {
            flag(e, "p_max must be positive");
        }
    }

    let mut membership = vec![0usize; s.fleet.len()];
    for g in &s.groups {
        let e = Entity::Group(g.id);
        if g.members.iter().any(|&i| i >= s.fleet.len()) {
            flag(e, "member index outside the fleet");
            continue;
        }
        for &i in &g.members {
            membership[i] += 1;
        }
        if g.parking_slots == 0 {
            flag(e, "parking_slots must be positive");
        }
        if g.members.iter().any(|&i| s.fleet[i].parking_slots() != g.parking_slots) {
            flag(e, "members must share the group's parking duration");
        }
        if g.members.iter().any(|&i| s.fleet[i].group_id != g.id) {
            flag(e, "member carries a different group_id");
        }
        if g.alpha <= zero {
            flag(e, "alpha must be positive");
        }
        let total = g.members.iter().fold(S::zero(), |acc, &i| acc + s.fleet[i].p_max);
        if (total - g.x_cap_total).abs() > S::tolerance() {
            flag(e, "x_cap_total must equal the members' summed p_max");
        }
        if g.a_bound < zero {
            flag(e, "a_bound must be non-negative");
        }
    }
    for (i, count) in membership.iter().enumerate() {
        match count {
            1 => {}
            0 => flag(Entity::Ev(s.fleet[i].id), "belongs to no group"),
            _ => flag(Entity::Ev(s.fleet[i].id), "belongs to more than one group"),
        }
    }

    if s.prices.len() != s.grid.num_slots {
        flag(Entity::Prices, "length must equal num_slots");
    }
    if max_elem(s.prices.prices()) != Some(s.prices.pi_max()) {
        flag(Entity::Prices, "pi_max must equal the maximum price");
    }
    if !(s.eta > zero && s.eta <= S::one()) {
        flag(Entity::Scenario, "eta must lie in (0, 1]");
    }
    if s.lookahead == 0 || s.lookahead > s.grid.num_slots {
        flag(Entity::Scenario, "lookahead must lie in [1, num_slots]");
    }
    out
}

/// Small hand-checkable instances.
pub mod fixtures {
    use super::*;

    /// The two-EV instance where P2's optimum cannot be disaggregated:
    /// T = 2, η = 1, Δt = 1 h, both EVs need 1 kWh; EV 1 (1 kW) can only
    /// charge in slot 0, EV 2 (2 kW) in slots 0 and 1.
    pub fn two_ev<S: Scalar>(prices: [f64; 2]) -> Scenario<S> {
        two_ev_with_max(prices, 1.0)
    }

    /// Same instance with `E_max = E_cap = e_max` for both EVs. With
    /// `e_max ≥ 2` the slot-1 cap is 2 kW, so P2's optimum is x = (0, 2).
    pub fn two_ev_with_max<S: Scalar>(prices: [f64; 2], e_max: f64) -> Scenario<S> {
        let one = S::one();
        let e_max = S::lit(e_max);
        let fleet = vec![
            Ev {
                id: EvId(1),
                group_id: GroupId(0),
                p_max: one,
                e_req: one,
                e_max,
                e_cap: e_max,
                arrival_slot: 0,
                departure_slot: 1,
            },
            Ev {
                id: EvId(2),
                group_id: GroupId(0),
                p_max: S::lit(2.0),
                e_req: one,
                e_max,
                e_cap: e_max,
                arrival_slot: 0,
                departure_slot: 2,
            },
        ];
        let prices = PriceSeries::new(prices.iter().map(|&p| S::lit(p)).collect()).unwrap();
        Scenario::new(TimeGrid::new(2, one), fleet, prices, one, 1, one)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::two_ev;
    use super::*;

    fn ev(id: u32, group: u32, arrival: usize, departure: usize) -> Ev<f64> {
        Ev {
            id: EvId(id),
            group_id: GroupId(group),
            p_max: 10.0,
            e_req: 5.0,
            e_max: 8.0,
            e_cap: 10.0,
            arrival_slot: arrival,
            departure_slot: departure,
        }
    }

    fn scenario(fleet: Vec<Ev<f64>>) -> Scenario<f64> {
        let prices = PriceSeries::new(vec![1.0; 6]).unwrap();
        Scenario::new(TimeGrid::new(6, 1.0), fleet, prices, 1.0, 2, 1.0)
    }

    #[test]
    fn well_formed_scenario_is_clean() {
        let s = scenario(vec![ev(1, 0, 0, 3), ev(2, 0, 2, 5), ev(3, 1, 1, 2)]);
        assert!(validate_scenario(&s).is_empty());
        assert_eq!(s.groups.len(), 2);
        assert_eq!(s.groups[0].x_cap_total, 20.0);
    }

    #[test]
    fn zero_requirement_is_flagged_once() {
        let mut bad = ev(7, 0, 0, 3);
        bad.e_req = 0.0;
        let v = validate_scenario(&scenario(vec![bad, ev(2, 0, 1, 4)]));
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].entity, Entity::Ev(EvId(7)));
    }

    #[test]
    fn mixed_parking_spans_flag_the_group() {
        let v = validate_scenario(&scenario(vec![ev(1, 4, 0, 1), ev(2, 4, 0, 2)]));
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].entity, Entity::Group(GroupId(4)));
    }

    #[test]
    fn overlapping_groups_flag_the_ev() {
        let mut s = scenario(vec![ev(1, 0, 0, 3)]);
        let mut dup = s.groups[0].clone();
        dup.id = GroupId(9);
        dup.members = vec![0];
        s.groups.push(dup);
        let v = validate_scenario(&s);
        assert!(v.iter().any(|x| x.entity == Entity::Ev(EvId(1))), "{v:?}");
    }

    #[test]
    fn bad_globals_are_flagged() {
        let mut s = scenario(vec![ev(1, 0, 0, 3)]);
        s.eta = 1.5;
        s.lookahead = 0;
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 2, "{v:?}");
        assert!(v.iter().all(|x| x.entity == Entity::Scenario));
    }

    #[test]
    fn two_ev_example_caps() {
        let s = two_ev::<f64>([2.0, 1.0]);
        // Only the shared-parking-duration rule is broken (spans 1 and 2).
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].entity, Entity::Group(GroupId(0)));
        // Enumerate per EV: slot 0 has both (min{1,1} + min{1,2}), slot 1 only EV 2.
        assert_eq!(group_power_cap(&s, GroupId(0), 0).unwrap(), 2.0);
        assert_eq!(group_power_cap(&s, GroupId(0), 1).unwrap(), 1.0);
        assert_eq!(s.cap_series(0), vec![2.0, 1.0]);
    }

    #[test]
    fn idle_slot_has_zero_cap() {
        let s = scenario(vec![ev(1, 0, 2, 4)]);
        assert_eq!(group_power_cap(&s, GroupId(0), 0).unwrap(), 0.0);
        assert_eq!(group_power_cap(&s, GroupId(0), 5).unwrap(), 0.0);
    }

    #[test]
    fn cap_errors() {
        let s = scenario(vec![ev(1, 0, 2, 4)]);
        assert_eq!(
            group_power_cap(&s, GroupId(3), 0),
            Err(ModelError::UnknownGroup(GroupId(3)))
        );
        assert!(matches!(
            group_power_cap(&s, GroupId(0), 6),
            Err(ModelError::SlotOutOfRange { .. })
        ));
    }

    #[test]
    fn pi_max_matches_scan() {
        let p = PriceSeries::new(vec![0.3, -0.1, 0.7, 0.2]).unwrap();
        assert_eq!(p.pi_max(), 0.7);
        assert!(PriceSeries::<f64>::new(vec![]).is_err());
    }
}
