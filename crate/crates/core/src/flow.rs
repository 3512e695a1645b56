//! Splitting a group schedule into per-EV schedules.
//!
//! Offline, the split is a feasible circulation in the network
//! `s → slot t → EV v → r → s`; online, power is handed out first-in
//! first-out over demand arrivals.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{group_power_cap, EvId, GroupId, ModelError, Scenario};
use crate::scalar::{FlowValue, Scalar};

/// Largest network [`hoffman_verify`] will enumerate.
pub const HOFFMAN_MAX_NODES: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("schedule has {got} entries, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("x({slot}) = {value} lies outside [0, {cap}]")]
    OutOfBounds { slot: usize, value: f64, cap: f64 },
    #[error("network has {0} nodes, subset enumeration allows {HOFFMAN_MAX_NODES}")]
    TooManyNodes(usize),
}

/// Max-flow on a small dense graph (Dinic).
#[derive(Clone, Debug)]
pub struct MaxFlow<F> {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<F>,
}

impl<F: FlowValue> MaxFlow<F> {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    /// Adds `from → to` and returns its edge index.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: F) -> usize {
        let id = self.to.len();
        self.adj[from].push(id);
        self.to.push(to);
        self.cap.push(cap);
        self.adj[to].push(id + 1);
        self.to.push(from);
        self.cap.push(F::zero());
        id
    }

    /// Flow pushed through edge `id`.
    pub fn flow(&self, id: usize) -> F {
        self.cap[id ^ 1]
    }

    fn levels(&self, source: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.adj.len()];
        level[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if level[v].is_none() && self.cap[e] > F::zero() {
                    level[v] = level[u].map(|l| l + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, sink: usize, limit: F, level: &[Option<usize>], next: &mut [usize]) -> F {
        if u == sink {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let v = self.to[e];
            let forward = matches!((level[u], level[v]), (Some(a), Some(b)) if b == a + 1);
            if forward && self.cap[e] > F::zero() {
                let bottleneck = if self.cap[e] < limit { self.cap[e] } else { limit };
                let pushed = self.augment(v, sink, bottleneck, level, next);
                if pushed > F::zero() {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        F::zero()
    }

    /// Maximum flow value; `unbounded` must exceed any possible flow.
    pub fn run(&mut self, source: usize, sink: usize, unbounded: F) -> F {
        let mut total = F::zero();
        loop {
            let level = self.levels(source);
            if level[sink].is_none() {
                return total;
            }
            let mut next = vec![0; self.adj.len()];
            loop {
                let pushed = self.augment(source, sink, unbounded, &level, &mut next);
                if pushed == F::zero() {
                    break;
                }
                total += pushed;
            }
        }
    }

    /// Nodes reachable from `source` in the residual graph.
    pub fn reachable(&self, source: usize) -> Vec<bool> {
        self.levels(source).iter().map(Option::is_some).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Node {
    Source,
    Sink,
    Slot(usize),
    Ev(EvId),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Source => f.write_str("s"),
            Node::Sink => f.write_str("r"),
            Node::Slot(t) => write!(f, "slot {t}"),
            Node::Ev(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircEdge<S> {
    pub from: usize,
    pub to: usize,
    pub lower: S,
    /// `None` means unbounded.
    pub upper: Option<S>,
}

/// Network whose feasible circulations are exactly the per-EV splits of `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CirculationNetwork<S> {
    pub nodes: Vec<Node>,
    pub edges: Vec<CircEdge<S>>,
    /// Fleet index of each EV node, in node order.
    pub evs: Vec<usize>,
    /// Edge index of `(slot t, EV v)`, per EV then slot.
    slot_edges: Vec<Vec<(usize, usize)>>,
}

const SOURCE: usize = 0;
const SINK: usize = 1;

impl<S: Scalar> CirculationNetwork<S> {
    /// Builds the network for group `g` and aggregate schedule `x`.
    pub fn build(s: &Scenario<S>, g: GroupId, x: &[S]) -> Result<Self, FlowError> {
        let horizon = s.num_slots();
        if x.len() != horizon {
            return Err(FlowError::LengthMismatch {
                got: x.len(),
                expected: horizon,
            });
        }
        let group = s.group(g)?;
        let mut nodes = vec![Node::Source, Node::Sink];
        nodes.extend((0..horizon).map(Node::Slot));
        nodes.extend(group.members.iter().map(|&i| Node::Ev(s.fleet[i].id)));
        let mut edges = Vec::new();
        for (t, &xt) in x.iter().enumerate() {
            edges.push(CircEdge {
                from: SOURCE,
                to: 2 + t,
                lower: xt,
                upper: Some(xt),
            });
        }
        let (eta, dt) = (s.eta, s.dt());
        let mut slot_edges = Vec::with_capacity(group.members.len());
        for (k, &i) in group.members.iter().enumerate() {
            let ev = &s.fleet[i];
            let node = 2 + horizon + k;
            let mut own = Vec::new();
            for t in ev.arrival_slot..ev.departure_slot.min(horizon) {
                own.push((t, edges.len()));
                edges.push(CircEdge {
                    from: 2 + t,
                    to: node,
                    lower: S::zero(),
                    upper: Some(ev.p_max),
                });
            }
            slot_edges.push(own);
            edges.push(CircEdge {
                from: node,
                to: SINK,
                lower: ev.req_units(eta, dt),
                upper: Some(ev.max_units(eta, dt)),
            });
        }
        edges.push(CircEdge {
            from: SINK,
            to: SOURCE,
            lower: S::zero(),
            upper: None,
        });
        Ok(Self {
            nodes,
            edges,
            evs: group.members.clone(),
            slot_edges,
        })
    }

    /// Σ lower bounds into `inside` and Σ upper bounds out of it; `None`
    /// for the latter when an unbounded edge leaves.
    pub fn cut_bounds(&self, inside: &[bool]) -> (S, Option<S>) {
        let mut lower_in = S::zero();
        let mut upper_out = Some(S::zero());
        for e in &self.edges {
            match (inside[e.from], inside[e.to]) {
                (false, true) => lower_in += e.lower,
                (true, false) => upper_out = upper_out.zip(e.upper).map(|(a, b)| a + b),
                _ => {}
            }
        }
        (lower_in, upper_out)
    }
}

/// Node set `W` with Σ_{δ⁻(W)} ℓ > Σ_{δ⁺(W)} u.
#[derive(Clone, Debug, PartialEq)]
pub struct HoffmanCertificate<S> {
    pub nodes: Vec<Node>,
    pub lower_in: S,
    pub upper_out: S,
}

impl<S> HoffmanCertificate<S> {
    pub fn contains(&self, node: Node) -> bool {
        self.nodes.contains(&node)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvSchedule<S> {
    pub ev: EvId,
    pub power: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Disaggregation<S> {
    Feasible(Vec<EvSchedule<S>>),
    Infeasible(HoffmanCertificate<S>),
}

impl<S> Disaggregation<S> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Disaggregation::Feasible(_))
    }
}

fn members(net_nodes: &[Node], inside: &[bool]) -> Vec<Node> {
    net_nodes
        .iter()
        .zip(inside)
        .filter(|(_, &b)| b)
        .map(|(n, _)| *n)
        .collect()
}

fn certificate<S: Scalar>(net: &CirculationNetwork<S>, inside: &[bool]) -> Option<HoffmanCertificate<S>> {
    let (lower_in, upper_out) = net.cut_bounds(inside);
    let upper_out = upper_out?;
    (!lower_in.le_tol(upper_out)).then(|| HoffmanCertificate {
        nodes: members(&net.nodes, inside),
        lower_in,
        upper_out,
    })
}

/// Splits group `g`'s schedule `x` into per-EV schedules, or returns a node
/// set violating Hoffman's condition.
///
/// Floating inputs are solved on a 1e-6 kW grid with lower bounds rounded
/// down and upper bounds rounded up; exact scalars are solved exactly.
pub fn circulation_disaggregate<S: Scalar>(
    s: &Scenario<S>,
    g: GroupId,
    x: &[S],
) -> Result<Disaggregation<S>, FlowError> {
    if x.len() != s.num_slots() {
        return Err(FlowError::LengthMismatch {
            got: x.len(),
            expected: s.num_slots(),
        });
    }
    for (t, &xt) in x.iter().enumerate() {
        let cap = group_power_cap(s, g, t)?;
        if xt < -S::tolerance() || !xt.le_tol(cap) {
            return Err(FlowError::OutOfBounds {
                slot: t,
                value: xt.as_f64(),
                cap: cap.as_f64(),
            });
        }
    }
    let net = CirculationNetwork::build(s, g, x)?;
    let n = net.nodes.len();
    let (super_source, super_sink) = (n, n + 1);
    let mut mf = MaxFlow::<S::Flow>::new(n + 2);
    let mut excess = vec![<S::Flow as num_traits::Zero>::zero(); n];
    let mut bounded_total = <S::Flow as num_traits::Zero>::zero();
    let mut lowers = Vec::with_capacity(net.edges.len());
    let mut edge_ids = Vec::with_capacity(net.edges.len());
    for e in &net.edges {
        let lower = e.lower.to_flow_floor();
        let upper = e.upper.map(|u| u.to_flow_ceil());
        if let Some(u) = upper {
            bounded_total += u;
        }
        bounded_total += lower;
        lowers.push((lower, upper));
    }
    let unbounded = bounded_total + <S::Flow as num_traits::One>::one();
    for (e, &(lower, upper)) in net.edges.iter().zip(&lowers) {
        let room = upper.map_or(unbounded, |u| u - lower);
        edge_ids.push(mf.add_edge(e.from, e.to, room));
        excess[e.to] += lower;
        excess[e.from] -= lower;
    }
    let zero = <S::Flow as num_traits::Zero>::zero();
    let mut required = zero;
    for (v, &ex) in excess.iter().enumerate() {
        if ex > zero {
            mf.add_edge(super_source, v, ex);
            required += ex;
        } else if ex < zero {
            mf.add_edge(v, super_sink, zero - ex);
        }
    }
    let pushed = mf.run(super_source, super_sink, unbounded);
    if pushed < required {
        let reach = mf.reachable(super_source);
        let inside: Vec<bool> = reach[..n].to_vec();
        let (lower_in, upper_out) = net.cut_bounds(&inside);
        return Ok(Disaggregation::Infeasible(HoffmanCertificate {
            nodes: members(&net.nodes, &inside),
            lower_in,
            upper_out: upper_out.unwrap_or(lower_in),
        }));
    }
    let horizon = s.num_slots();
    let schedules = net
        .evs
        .iter()
        .zip(&net.slot_edges)
        .map(|(&i, own)| {
            let mut power = vec![S::zero(); horizon];
            for &(t, e) in own {
                power[t] = S::from_flow(lowers[e].0 + mf.flow(edge_ids[e]));
            }
            EvSchedule {
                ev: s.fleet[i].id,
                power,
            }
        })
        .collect();
    Ok(Disaggregation::Feasible(schedules))
}

#[derive(Clone, Debug, PartialEq)]
pub enum HoffmanVerdict<S> {
    Holds,
    Fails(HoffmanCertificate<S>),
}

impl<S> HoffmanVerdict<S> {
    pub fn holds(&self) -> bool {
        matches!(self, HoffmanVerdict::Holds)
    }
}

/// Checks Hoffman's condition on every node subset, in increasing bitmask
/// order (bit `i` is node `i`).
pub fn hoffman_verify<S: Scalar>(net: &CirculationNetwork<S>) -> Result<HoffmanVerdict<S>, FlowError> {
    let n = net.nodes.len();
    if n > HOFFMAN_MAX_NODES {
        return Err(FlowError::TooManyNodes(n));
    }
    let mut inside = vec![false; n];
    for mask in 1u32..(1u32 << n) {
        for (i, b) in inside.iter_mut().enumerate() {
            *b = mask & (1 << i) != 0;
        }
        if let Some(c) = certificate(net, &inside) {
            return Ok(HoffmanVerdict::Fails(c));
        }
    }
    Ok(HoffmanVerdict::Holds)
}

/// Per-EV service state for online dispatch, in kW·slot units.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceLedger<S> {
    /// Delivered so far, per fleet index.
    pub served: Vec<S>,
    /// First slot at which `served` reached the requirement.
    pub completed_at: Vec<Option<usize>>,
}

impl<S: Scalar> ServiceLedger<S> {
    pub fn new(fleet_size: usize) -> Self {
        Self {
            served: vec![S::zero(); fleet_size],
            completed_at: vec![None; fleet_size],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FifoOutcome<S> {
    /// `(fleet index, power kW)` in allocation order.
    pub allocations: Vec<(usize, S)>,
    pub delivered: S,
    /// Part of `x_t` no active EV could take.
    pub unallocated: S,
}

/// Hands out `x_t` for slot `t` to the group's active EVs in order of
/// arrival, ties by EV id. Each EV takes at most min{P_v, E_max/(ηΔt)} and
/// never more than its outstanding requirement.
pub fn fifo_disaggregate<S: Scalar>(
    s: &Scenario<S>,
    g: GroupId,
    x_t: S,
    t: usize,
    ledger: &mut ServiceLedger<S>,
) -> Result<FifoOutcome<S>, FlowError> {
    let group = s.group(g)?;
    let (eta, dt) = (s.eta, s.dt());
    let mut order: Vec<usize> = group
        .members
        .iter()
        .copied()
        .filter(|&i| s.fleet[i].is_active(t))
        .collect();
    order.sort_unstable_by_key(|&i| (s.fleet[i].arrival_slot, s.fleet[i].id));

    let mut left = x_t.pos();
    let mut allocations = Vec::new();
    let mut delivered = S::zero();
    for i in order {
        if left <= S::zero() {
            break;
        }
        let ev = &s.fleet[i];
        let need = ev.req_units(eta, dt);
        let take = ev
            .slot_cap(eta, dt)
            .min_of((need - ledger.served[i]).pos())
            .min_of(left);
        if take <= S::zero() {
            continue;
        }
        ledger.served[i] += take;
        delivered += take;
        left -= take;
        allocations.push((i, take));
        if ledger.completed_at[i].is_none() && need.le_tol(ledger.served[i]) {
            ledger.completed_at[i] = Some(t);
        }
    }
    Ok(FifoOutcome {
        allocations,
        delivered,
        unallocated: left.pos(),
    })
}

/// [`fifo_disaggregate`] over consecutive slots of one group. Members are
/// sorted once; EVs that are satisfied or gone are dropped from the front,
/// so a slot only visits the EVs it serves.
#[derive(Clone, Debug)]
pub struct FifoDispatcher {
    order: Vec<usize>,
    head: usize,
    last_slot: Option<usize>,
}

impl FifoDispatcher {
    pub fn new<S: Scalar>(s: &Scenario<S>, g: GroupId) -> Result<Self, FlowError> {
        let mut order = s.group(g)?.members.clone();
        order.sort_unstable_by_key(|&i| (s.fleet[i].arrival_slot, s.fleet[i].id));
        Ok(Self {
            order,
            head: 0,
            last_slot: None,
        })
    }

    /// Same allocation as [`fifo_disaggregate`]. Slots must not go backwards.
    pub fn dispatch<S: Scalar>(
        &mut self,
        s: &Scenario<S>,
        x_t: S,
        t: usize,
        ledger: &mut ServiceLedger<S>,
    ) -> FifoOutcome<S> {
        assert!(self.last_slot.is_none_or(|l| l <= t), "slots must not go backwards");
        self.last_slot = Some(t);
        let (eta, dt) = (s.eta, s.dt());
        let done = |i: usize, ledger: &ServiceLedger<S>| {
            let ev = &s.fleet[i];
            ev.departure_slot <= t || ledger.completed_at[i].is_some() || ev.req_units(eta, dt) <= ledger.served[i]
        };
        while self.head < self.order.len() && done(self.order[self.head], ledger) {
            self.head += 1;
        }
        let mut left = x_t.pos();
        let mut allocations = Vec::new();
        let mut delivered = S::zero();
        for &i in &self.order[self.head..] {
            let ev = &s.fleet[i];
            if left <= S::zero() || ev.arrival_slot > t {
                break;
            }
            if !ev.is_active(t) {
                continue;
            }
            let need = ev.req_units(eta, dt);
            let take = ev
                .slot_cap(eta, dt)
                .min_of((need - ledger.served[i]).pos())
                .min_of(left);
            if take <= S::zero() {
                continue;
            }
            ledger.served[i] += take;
            delivered += take;
            left -= take;
            allocations.push((i, take));
            if ledger.completed_at[i].is_none() && need.le_tol(ledger.served[i]) {
                ledger.completed_at[i] = Some(t);
            }
        }
        FifoOutcome {
            allocations,
            delivered,
            unallocated: left.pos(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{two_ev, two_ev_with_max};
    use num_rational::Rational64;

    const G: GroupId = GroupId(0);

    #[test]
    fn max_flow_small_graph() {
        let mut mf = MaxFlow::<i64>::new(4);
        mf.add_edge(0, 1, 3);
        mf.add_edge(0, 2, 2);
        mf.add_edge(1, 2, 5);
        mf.add_edge(1, 3, 2);
        mf.add_edge(2, 3, 3);
        assert_eq!(mf.run(0, 3, 100), 5);
    }

    #[test]
    fn late_heavy_schedule_is_infeasible() {
        let s = two_ev_with_max::<f64>([2.0, 1.0], 2.0);
        let v = circulation_disaggregate(&s, G, &[0.0, 2.0]).unwrap();
        let Disaggregation::Infeasible(cert) = v else {
            panic!("expected a certificate");
        };
        assert!(cert.lower_in > cert.upper_out);
        // EV 1's requirement edge (ev 1 → r) enters W.
        assert!(
            cert.contains(Node::Sink) && !cert.contains(Node::Ev(EvId(1))),
            "{cert:?}"
        );
        let net = CirculationNetwork::build(&s, G, &[0.0, 2.0]).unwrap();
        assert!(!hoffman_verify(&net).unwrap().holds());
    }

    #[test]
    fn early_schedule_splits() {
        let s = two_ev::<Rational64>([2.0, 1.0]);
        let one = Rational64::from_integer(1);
        let zero = Rational64::from_integer(0);
        let v = circulation_disaggregate(&s, G, &[Rational64::from_integer(2), zero]).unwrap();
        let Disaggregation::Feasible(p) = v else {
            panic!("expected a split");
        };
        assert_eq!(p[0].power, vec![one, zero]);
        assert_eq!(p[1].power, vec![one, zero]);
    }

    #[test]
    fn rejects_out_of_bounds_input() {
        let s = two_ev::<f64>([2.0, 1.0]);
        assert!(matches!(
            circulation_disaggregate(&s, G, &[3.0, 0.0]),
            Err(FlowError::OutOfBounds { slot: 0, .. })
        ));
        assert!(circulation_disaggregate(&s, G, &[-1.0, 0.0]).is_err());
        assert!(circulation_disaggregate(&s, G, &[0.0]).is_err());
    }

    #[test]
    fn hoffman_agrees_on_two_ev() {
        let s = two_ev::<Rational64>([2.0, 1.0]);
        let r = |v: i64| Rational64::from_integer(v);
        for x in [[r(0), r(1)], [r(2), r(0)], [r(1), r(1)], [r(0), r(0)]] {
            let net = CirculationNetwork::build(&s, G, &x).unwrap();
            let h = hoffman_verify(&net).unwrap();
            let c = circulation_disaggregate(&s, G, &x).unwrap();
            assert_eq!(h.holds(), c.is_feasible(), "x = {x:?}");
        }
    }

    #[test]
    fn hoffman_refuses_large_networks() {
        let mut s = two_ev::<f64>([2.0, 1.0]);
        s.grid.num_slots = 30;
        let net = CirculationNetwork::build(&s, G, &[0.0; 30]).unwrap();
        assert_eq!(hoffman_verify(&net), Err(FlowError::TooManyNodes(34)));
    }

    fn fifo_pair() -> Scenario<f64> {
        use crate::model::{Ev, PriceSeries, TimeGrid};
        let ev = |id: u32, arrival: usize| Ev {
            id: EvId(id),
            group_id: G,
            p_max: 2.0,
            e_req: 10.0,
            e_max: 12.0,
            e_cap: 20.0,
            arrival_slot: arrival,
            departure_slot: arrival + 8,
        };
        let prices = PriceSeries::new(vec![1.0; 12]).unwrap();
        Scenario::new(TimeGrid::new(12, 1.0), vec![ev(2, 1), ev(1, 2)], prices, 1.0, 1, 1.0)
    }

    #[test]
    fn fifo_serves_earliest_arrival_first() {
        let s = fifo_pair();
        let mut ledger = ServiceLedger::new(2);
        let out = fifo_disaggregate(&s, G, 2.0, 2, &mut ledger).unwrap();
        assert_eq!(out.allocations, vec![(0, 2.0)]);
        assert_eq!(out.unallocated, 0.0);
    }

    #[test]
    fn fifo_breaks_arrival_ties_by_id() {
        let mut s = fifo_pair();
        s.fleet[1].arrival_slot = 1;
        let mut ledger = ServiceLedger::new(2);
        let out = fifo_disaggregate(&s, G, 2.0, 2, &mut ledger).unwrap();
        assert_eq!(out.allocations, vec![(1, 2.0)]);
    }

    #[test]
    fn fifo_spills_over_at_cap() {
        let s = fifo_pair();
        let mut ledger = ServiceLedger::new(2);
        let out = fifo_disaggregate(&s, G, 3.0, 2, &mut ledger).unwrap();
        assert_eq!(out.allocations, vec![(0, 2.0), (1, 1.0)]);
        assert_eq!(ledger.served, vec![2.0, 1.0]);
        let out = fifo_disaggregate(&s, G, 9.0, 3, &mut ledger).unwrap();
        assert_eq!(out.delivered, 4.0);
        assert_eq!(out.unallocated, 5.0);
    }

    #[test]
    fn fifo_skips_inactive_and_satisfied() {
        let s = fifo_pair();
        let mut ledger = ServiceLedger::new(2);
        // Only the first EV has arrived at slot 1.
        let out = fifo_disaggregate(&s, G, 4.0, 1, &mut ledger).unwrap();
        assert_eq!(out.allocations, vec![(0, 2.0)]);
        ledger.served[0] = 9.0;
        let out = fifo_disaggregate(&s, G, 4.0, 3, &mut ledger).unwrap();
        assert_eq!(out.allocations, vec![(0, 1.0), (1, 2.0)]);
        assert_eq!(ledger.completed_at, vec![Some(3), None]);
        let out = fifo_disaggregate(&s, G, 1.0, 4, &mut ledger).unwrap();
        assert_eq!(out.allocations, vec![(1, 1.0)]);
    }

    #[test]
    fn fifo_zero_input_is_a_no_op() {
        let s = fifo_pair();
        let mut ledger = ServiceLedger::new(2);
        let before = ledger.clone();
        let out = fifo_disaggregate(&s, G, 0.0, 3, &mut ledger).unwrap();
        assert!(out.allocations.is_empty());
        assert_eq!(ledger, before);
    }

    #[test]
    fn fifo_records_completion() {
        let s = fifo_pair();
        let mut ledger = ServiceLedger::new(2);
        for t in 1..=6 {
            fifo_disaggregate(&s, G, 4.0, t, &mut ledger).unwrap();
        }
        assert_eq!(ledger.served, vec![10.0, 10.0]);
        assert_eq!(ledger.completed_at, vec![Some(5), Some(6)]);
    }
}
