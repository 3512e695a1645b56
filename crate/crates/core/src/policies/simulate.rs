//! The slot-by-slot simulation loop shared by every policy.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::DemandProfile;
use crate::flow::{FifoDispatcher, FlowError, ServiceLedger};
use crate::model::{EvId, GroupId, PriceSeries, Scenario};
use crate::policies::baseline::{offline_with_prices, plan_greedy, InfeasibleScenario};
use crate::policies::bounds::{delay_bound, gap_bound, BoundError};
use crate::policies::mpc::{apply_first_step, plan_mpc, MpcState};
use crate::policies::plan::{buffered_average, plan_with_penalty, PlanBuffer};
use crate::queues::{
    bound_constants, increment_audit, IncrementViolation, Penalty, QueueError, QueueState, QueueTrace,
};
use crate::scalar::{max_elem, Scalar};

/// Audit slack on queue bounds, kW.
pub const QUEUE_BOUND_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Greedy,
    Mpc,
    Dpp,
    DppHetero,
    Offline,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Offline,
        Policy::DppHetero,
        Policy::Dpp,
        Policy::Mpc,
        Policy::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Greedy => "greedy",
            Policy::Mpc => "mpc",
            Policy::Dpp => "dpp",
            Policy::DppHetero => "dpp_hetero",
            Policy::Offline => "offline",
        }
    }

    pub fn is_dpp(self) -> bool {
        matches!(self, Policy::Dpp | Policy::DppHetero)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown policy '{0}' (expected greedy, mpc, dpp, dpp_hetero or offline)")]
pub struct UnknownPolicy(String);

impl FromStr for Policy {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("scenario is invalid: {0}")]
    Invalid(String),
    #[error("forecast has {got} prices, expected {expected}")]
    ForecastLength { got: usize, expected: usize },
    #[error("per-group penalty has {got} entries for {expected} groups")]
    PenaltyLength { got: usize, expected: usize },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Offline(#[from] InfeasibleScenario),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimParams<S> {
    pub policy: Policy,
    pub w: usize,
    /// Used by the drift-plus-penalty policies only.
    pub penalty: Penalty<S>,
    /// Prices the planners see; costs always use the scenario's prices.
    pub forecast: Option<Vec<S>>,
}

impl<S: Scalar> SimParams<S> {
    pub fn new(policy: Policy, w: usize, penalty: Penalty<S>) -> Self {
        Self {
            policy,
            w,
            penalty,
            forecast: None,
        }
    }

    pub fn with_forecast(mut self, forecast: Vec<S>) -> Self {
        self.forecast = Some(forecast);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvReport {
    pub id: EvId,
    pub group: GroupId,
    pub required_kwh: f64,
    pub served_kwh: f64,
    pub completed_slot: Option<usize>,
    /// Completion slot minus the last demand slot, in hours. For EVs that
    /// never complete, measured to departure instead.
    pub delay_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupReport {
    pub id: GroupId,
    pub members: usize,
    pub v: Option<f64>,
    pub avg_delay_h: f64,
    pub max_delay_h: f64,
    pub delay_bound_h: Option<f64>,
    pub q_bound: Option<f64>,
    pub z_bound: Option<f64>,
    pub max_q: f64,
    pub max_z: f64,
    pub x_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueueBoundViolation {
    pub group: GroupId,
    pub slot: usize,
    pub queue: &'static str,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Audits {
    pub queue_bounds: Vec<QueueBoundViolation>,
    pub increments: Vec<(GroupId, IncrementViolation)>,
    /// Groups whose measured max delay reached the analytic bound.
    pub delay_bounds: Vec<GroupId>,
    /// (group, slot) pairs where delivered power exceeded the group cap.
    pub power_caps: Vec<(GroupId, usize)>,
}

impl Audits {
    pub fn is_clean(&self) -> bool {
        self.queue_bounds.is_empty()
            && self.increments.is_empty()
            && self.delay_bounds.is_empty()
            && self.power_caps.is_empty()
    }

    pub fn violation_count(&self) -> usize {
        self.queue_bounds.len() + self.increments.len() + self.delay_bounds.len() + self.power_caps.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub policy: Policy,
    pub w: usize,
    /// Homogeneous weight, or the smallest group weight.
    pub v: Option<f64>,
    pub v_groups: Vec<f64>,
    pub alpha: f64,
    pub total_cost_usd: f64,
    /// Energy drawn from the grid, Δt·Σx.
    pub grid_energy_kwh: f64,
    /// USD per kWh drawn.
    pub unit_cost: f64,
    pub avg_delay_h: f64,
    pub max_delay_h: f64,
    pub required_kwh: f64,
    pub served_kwh: f64,
    pub unserved_kwh: f64,
    /// Commanded grid energy no parked EV could take.
    pub trimmed_kwh: f64,
    pub gap_bound: Option<f64>,
    pub delay_bound_h: Option<f64>,
    /// Slots planned with a window shorter than `w` at the end of the horizon.
    pub truncated_windows: usize,
    pub missed_service: Vec<EvId>,
    pub groups: Vec<GroupReport>,
    pub evs: Vec<EvReport>,
    /// Delivered power per group and slot, kW.
    pub power: Vec<Vec<f64>>,
    pub audits: Audits,
    #[serde(skip)]
    pub trace: QueueTrace<f64>,
}

pub const SUMMARY_HEADER: &str =
    "policy,w,V,alpha,total_cost_usd,unit_cost,avg_delay_h,max_delay_h,unserved_kwh,gap_bound,delay_bound";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunReport {
    pub fn unserved_evs(&self) -> impl Iterator<Item = &EvReport> {
        self.evs.iter().filter(|e| e.completed_slot.is_none())
    }

    pub fn all_served(&self) -> bool {
        self.evs.iter().all(|e| e.completed_slot.is_some())
    }

    /// One CSV row in [`SUMMARY_HEADER`] order.
    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.w,
            opt(self.v),
            self.alpha,
            self.total_cost_usd,
            self.unit_cost,
            self.avg_delay_h,
            self.max_delay_h,
            self.unserved_kwh,
            opt(self.gap_bound),
            opt(self.delay_bound_h),
        )
    }

    pub fn write_json<W: Write>(&self, out: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(out, self)
    }
}

/// Runs `params.policy` over the whole horizon.
///
/// Every policy produces a per-group power command each slot. Drift-plus-
/// penalty, greedy and offline commands are handed to EVs first-in
/// first-out; power no EV can take is trimmed and reported. The MPC baseline
/// plans per EV and applies its own first step. Queues advance on delivered
/// power, so q is the group's true backlog. The offline policy's power and cost are those of the
/// full-horizon optimum; service and delay come from replaying it FIFO.
pub fn simulate<S: Scalar>(
    s: &Scenario<S>,
    demand: &DemandProfile<S>,
    params: &SimParams<S>,
) -> Result<RunReport, SimError> {
    let violations = crate::model::validate_scenario(&s.clone().with_lookahead(params.w.max(1)));
    if let Some(v) = violations.first() {
        return Err(SimError::Invalid(v.to_string()));
    }
    let horizon = s.num_slots();
    let groups = s.groups.len();
    let w = params.w;
    if let Penalty::PerGroup(vs) = &params.penalty {
        if vs.len() != groups {
            return Err(SimError::PenaltyLength {
                got: vs.len(),
                expected: groups,
            });
        }
    }
    let plan_prices: Vec<S> = match &params.forecast {
        Some(f) if f.len() != horizon => {
            return Err(SimError::ForecastLength {
                got: f.len(),
                expected: horizon,
            })
        }
        Some(f) => f.clone(),
        None => s.prices.prices().to_vec(),
    };
    let (eta, dt) = (s.eta, s.dt());
    let caps: Vec<Vec<S>> = (0..groups).map(|g| s.cap_series(g)).collect();
    let scenario = s.clone().with_lookahead(w).with_demand_bounds(&demand.per_group);

    let mut queues = QueueState::for_scenario(&scenario)?;
    let mut ledger = ServiceLedger::new(s.fleet.len());
    let mut buffer = PlanBuffer::new(w);
    let mut mpc = MpcState::new(s);
    let mut missed = Vec::new();
    let offline = match params.policy {
        Policy::Offline => Some(offline_with_prices(s, &plan_prices)?),
        _ => None,
    };
    let mut dispatchers = s
        .groups
        .iter()
        .map(|g| FifoDispatcher::new(s, g.id))
        .collect::<Result<Vec<_>, _>>()?;
    let mut power = vec![vec![S::zero(); horizon]; groups];
    let mut trimmed = S::zero();
    let mut truncated = 0;
    let mut cost = S::zero();

    for t in 0..horizon {
        let h = w.min(horizon - t);
        let window = &plan_prices[t..t + h];
        if h < w && matches!(params.policy, Policy::Dpp | Policy::DppHetero | Policy::Mpc) {
            truncated += 1;
        }
        let delivered: Vec<S> = if params.policy == Policy::Mpc {
            let plan = plan_mpc(s, &mpc, t, window);
            missed.extend(plan.missed.iter().map(|&i| s.fleet[i].id));
            let step = apply_first_step(s, &mut mpc, &plan);
            let mut x = vec![S::zero(); groups];
            for (gi, g) in s.groups.iter().enumerate() {
                for &i in &g.members {
                    if step[i] > S::zero() {
                        ledger.served[i] += step[i];
                        x[gi] += step[i];
                        if ledger.completed_at[i].is_none() && s.fleet[i].req_units(eta, dt).le_tol(ledger.served[i]) {
                            ledger.completed_at[i] = Some(t);
                        }
                    }
                }
            }
            x
        } else {
            let command: Vec<S> = match params.policy {
                Policy::Dpp | Policy::DppHetero => {
                    let window_caps: Vec<Vec<S>> = caps.iter().map(|c| c[t..t + h].to_vec()).collect();
                    let plan = plan_with_penalty(queues.q(), queues.z(), t, window, &window_caps, &params.penalty);
                    buffer.push(plan);
                    buffered_average(&buffer, groups, t)
                }
                Policy::Greedy => plan_greedy(s, t, &ledger),
                Policy::Offline => offline
                    .as_ref()
                    .map(|o| o.x.iter().map(|row| row[t]).collect())
                    .unwrap_or_default(),
                Policy::Mpc => unreachable!("handled above"),
            };
            let mut x = Vec::with_capacity(groups);
            for (gi, fifo) in dispatchers.iter_mut().enumerate() {
                let out = fifo.dispatch(s, command[gi], t, &mut ledger);
                trimmed += command[gi] - out.delivered;
                // The offline benchmark is costed as scheduled.
                x.push(if offline.is_some() { command[gi] } else { out.delivered });
            }
            x
        };
        let arrivals: Vec<S> = demand.per_group.iter().map(|a| a[t]).collect();
        queues.advance(&arrivals, &delivered)?;
        let total: S = delivered.iter().fold(S::zero(), |acc, &x| acc + x);
        cost += s.prices.at(t) * total * dt;
        for (g, x) in delivered.into_iter().enumerate() {
            power[g][t] = x;
        }
    }
    build_report(
        &scenario,
        demand,
        params,
        &plan_prices,
        Outcome {
            power,
            ledger,
            trace: queues.into_trace(),
            cost,
            trimmed,
            truncated,
            missed,
        },
    )
}

struct Outcome<S> {
    power: Vec<Vec<S>>,
    ledger: ServiceLedger<S>,
    trace: QueueTrace<S>,
    cost: S,
    trimmed: S,
    truncated: usize,
    missed: Vec<EvId>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn build_report<S: Scalar>(
    s: &Scenario<S>,
    demand: &DemandProfile<S>,
    params: &SimParams<S>,
    plan_prices: &[S],
    out: Outcome<S>,
) -> Result<RunReport, SimError> {
    let (eta, dt) = (s.eta, s.dt());
    let unit_kwh = (eta * dt).as_f64();
    let dt_h = dt.as_f64();
    let w = params.w;
    let dpp = params.policy.is_dpp();

    let evs: Vec<EvReport> = s
        .fleet
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            let end = demand.per_ev[i].end_slot();
            let done = out.ledger.completed_at[i];
            let finish = done.unwrap_or(ev.departure_slot);
            EvReport {
                id: ev.id,
                group: ev.group_id,
                required_kwh: ev.e_req.as_f64(),
                served_kwh: out.ledger.served[i].as_f64() * unit_kwh,
                completed_slot: done,
                delay_h: finish.saturating_sub(end) as f64 * dt_h,
            }
        })
        .collect();

    let planning = {
        let mut p = s.clone();
        p.prices = PriceSeries::new(plan_prices.to_vec()).map_err(FlowError::from)?;
        p
    };
    let constants = if dpp {
        Some(bound_constants(&planning, &params.penalty, w)?)
    } else {
        None
    };

    let mut audits = Audits::default();
    let mut groups = Vec::with_capacity(s.groups.len());
    let mut delay_bound_h: Option<f64> = None;
    for (gi, g) in s.groups.iter().enumerate() {
        let trace = &out.trace.groups[gi];
        let delays: Vec<f64> = g.members.iter().map(|&i| evs[i].delay_h).collect();
        let completed_max = g
            .members
            .iter()
            .filter(|&&i| evs[i].completed_slot.is_some())
            .map(|&i| evs[i].delay_h)
            .fold(0.0, f64::max);
        let x_bound = max_elem(&trace.a)
            .unwrap_or_else(S::zero)
            .max_of(max_elem(&trace.x).unwrap_or_else(S::zero));
        for v in increment_audit(&trace.q, w, x_bound) {
            audits.increments.push((g.id, v));
        }
        let caps = s.cap_series(gi);
        for (t, (&x, &c)) in out.power[gi].iter().zip(&caps).enumerate() {
            if !x.le_tol(c) {
                audits.power_caps.push((g.id, t));
            }
        }
        let mut report = GroupReport {
            id: g.id,
            members: g.members.len(),
            v: dpp.then(|| params.penalty.for_group(gi).as_f64()),
            avg_delay_h: mean(&delays),
            max_delay_h: delays.iter().copied().fold(0.0, f64::max),
            delay_bound_h: None,
            q_bound: None,
            z_bound: None,
            max_q: max_elem(&trace.q).map_or(0.0, S::as_f64),
            max_z: max_elem(&trace.z).map_or(0.0, S::as_f64),
            x_bound: x_bound.as_f64(),
        };
        if let Some(c) = &constants {
            let gc = &c.groups[gi];
            let (qb, zb) = (gc.q_bound.as_f64(), gc.z_bound.as_f64());
            for t in 0..trace.q.len() {
                for (name, value, bound) in [("q", trace.q[t].as_f64(), qb), ("z", trace.z[t].as_f64(), zb)] {
                    if value > bound + QUEUE_BOUND_SLACK {
                        audits.queue_bounds.push(QueueBoundViolation {
                            group: g.id,
                            slot: t,
                            queue: name,
                            value,
                            bound,
                        });
                    }
                }
            }
            let d = delay_bound(g, w, gc.q_bound, gc.z_bound, gc.v * c.pi_max, dt)?;
            let bound_h = d.hours.as_f64();
            if completed_max >= bound_h {
                audits.delay_bounds.push(g.id);
            }
            report.delay_bound_h = Some(bound_h);
            report.q_bound = Some(qb);
            report.z_bound = Some(zb);
            delay_bound_h = Some(delay_bound_h.map_or(bound_h, |b: f64| b.max(bound_h)));
        }
        groups.push(report);
    }

    // No finite bound at V = 0.
    let gap = constants
        .as_ref()
        .and_then(|c| gap_bound(c.b, w, params.penalty.min()).ok())
        .map(S::as_f64);
    let grid_energy: f64 = out
        .power
        .iter()
        .flat_map(|row| row.iter())
        .map(|x| x.as_f64())
        .sum::<f64>()
        * dt_h;
    let required: f64 = evs.iter().map(|e| e.required_kwh).sum();
    let served: f64 = evs.iter().map(|e| e.served_kwh).sum();
    let unserved: f64 = evs
        .iter()
        .filter(|e| e.completed_slot.is_none())
        .map(|e| (e.required_kwh - e.served_kwh).max(0.0))
        .sum::<f64>()
        + 0.0;
    let all_delays: Vec<f64> = evs.iter().map(|e| e.delay_h).collect();
    let cost = out.cost.as_f64();
    let v_groups: Vec<f64> = if dpp {
        (0..s.groups.len())
            .map(|g| params.penalty.for_group(g).as_f64())
            .collect()
    } else {
        Vec::new()
    };
    Ok(RunReport {
        policy: params.policy,
        w,
        v: dpp.then(|| params.penalty.min().as_f64()),
        v_groups,
        alpha: s.groups.first().map_or(0.0, |g| g.alpha.as_f64()),
        total_cost_usd: cost,
        grid_energy_kwh: grid_energy,
        unit_cost: if grid_energy > 0.0 { cost / grid_energy } else { 0.0 },
        avg_delay_h: mean(&all_delays),
        max_delay_h: all_delays.iter().copied().fold(0.0, f64::max),
        required_kwh: required,
        served_kwh: served,
        unserved_kwh: unserved,
        trimmed_kwh: out.trimmed.as_f64() * dt_h,
        gap_bound: gap,
        delay_bound_h,
        truncated_windows: out.truncated,
        missed_service: out.missed,
        groups,
        evs,
        power: out
            .power
            .iter()
            .map(|row| row.iter().map(|x| x.as_f64()).collect())
            .collect(),
        audits,
        trace: QueueTrace {
            groups: out
                .trace
                .groups
                .into_iter()
                .map(|g| crate::queues::GroupTrace {
                    id: g.id,
                    q: g.q.into_iter().map(S::as_f64).collect(),
                    z: g.z.into_iter().map(S::as_f64).collect(),
                    a: g.a.into_iter().map(S::as_f64).collect(),
                    x: g.x.into_iter().map(S::as_f64).collect(),
                })
                .collect(),
        },
    })
}
