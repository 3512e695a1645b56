//! Virtual queues with a `w`-slot period, their closed form, and the
//! increment bounds as executable audits.
//!
//! The backlog queue evolves along `w` interleaved chains:
//!
//! ```text
//! q(t) = max{q(t−w) + Σ_{s=t−w}^{t−1} (a(s) − x(s)), 0}
//! z(t) = max{z(t−w) − Σ_{s=t−w}^{t−1} x(s) + (α/R)·𝕀(q(t−w) > 0), 0}
//! ```
//!
//! with `q(t) = z(t) = 0` for `t < w`. Values at slot `t` only depend on
//! realized arrivals and implemented powers before `t`.

use std::collections::VecDeque;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::model::{GroupId, ModelError, Scenario};
use crate::scalar::{max_elem, min_elem, sum, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("window holds {got} slots, expected {expected}")]
    WindowLength { expected: usize, got: usize },
    #[error("expected {expected} group values, got {got}")]
    GroupCount { expected: usize, got: usize },
    #[error("closed form needs slots up to {needed}, series has {len}")]
    OutOfRange { needed: usize, len: usize },
    #[error("lookahead must be at least 1")]
    ZeroLookahead,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Order of service and arrival inside one period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueDiscipline {
    /// `q(t+w) = max{q(t) + Σa − Σx, 0}`; used by the scheduler.
    #[default]
    ClampAfter,
    /// `q(t+w) = max{q(t) − Σx, 0} + Σa`: the period's service only acts on
    /// backlog carried in from earlier periods.
    ServeThenArrive,
}

impl QueueDiscipline {
    pub fn step<S: Scalar>(self, q: S, arrivals: S, service: S) -> S {
        match self {
            QueueDiscipline::ClampAfter => (q + arrivals - service).pos(),
            QueueDiscipline::ServeThenArrive => (q - service).pos() + arrivals,
        }
    }
}

/// One period of both queues. `a_window` and `x_window` cover slots
/// `t−w..t`; `q_base` and `z_base` are the values at `t−w`.
pub fn update_queues<S: Scalar>(
    q_base: S,
    z_base: S,
    a_window: &[S],
    x_window: &[S],
    alpha_over_r: S,
) -> Result<(S, S), QueueError> {
    if a_window.len() != x_window.len() || a_window.is_empty() {
        return Err(QueueError::WindowLength {
            expected: a_window.len().max(1),
            got: x_window.len(),
        });
    }
    let served = sum(x_window);
    let q = QueueDiscipline::ClampAfter.step(q_base, sum(a_window), served);
    let indicator = if q_base > S::zero() { alpha_over_r } else { S::zero() };
    let z = (z_base - served + indicator).pos();
    Ok((q, z))
}

/// Zero-initialized backlog over the whole series.
pub fn backlog_recursion<S: Scalar>(
    a: &[S],
    x: &[S],
    w: usize,
    discipline: QueueDiscipline,
) -> Result<Vec<S>, QueueError> {
    if w == 0 {
        return Err(QueueError::ZeroLookahead);
    }
    if a.len() != x.len() {
        return Err(QueueError::WindowLength {
            expected: a.len(),
            got: x.len(),
        });
    }
    let mut q = vec![S::zero(); a.len()];
    for t in w..a.len() {
        q[t] = discipline.step(q[t - w], sum(&a[t - w..t]), sum(&x[t - w..t]));
    }
    Ok(q)
}

/// Prefix sums of `a` and `x` for repeated closed-form queries.
#[derive(Clone, Debug)]
pub struct SkipAhead<S> {
    w: usize,
    discipline: QueueDiscipline,
    a_prefix: Vec<S>,
    x_prefix: Vec<S>,
}

fn prefix<S: Scalar>(values: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut acc = S::zero();
    out.push(acc);
    for &v in values {
        acc += v;
        out.push(acc);
    }
    out
}

impl<S: Scalar> SkipAhead<S> {
    pub fn new(a: &[S], x: &[S], w: usize, discipline: QueueDiscipline) -> Result<Self, QueueError> {
        if w == 0 {
            return Err(QueueError::ZeroLookahead);
        }
        if a.len() != x.len() {
            return Err(QueueError::WindowLength {
                expected: a.len(),
                got: x.len(),
            });
        }
        Ok(Self {
            w,
            discipline,
            a_prefix: prefix(a),
            x_prefix: prefix(x),
        })
    }

    fn a_sum(&self, from: usize, to: usize) -> S {
        self.a_prefix[to] - self.a_prefix[from]
    }

    fn x_sum(&self, from: usize, to: usize) -> S {
        self.x_prefix[to] - self.x_prefix[from]
    }

    /// `q(t + n·w)` given `q(t) = q0`, for any base slot `t` and `n ≥ 1`.
    pub fn from_state(&self, q0: S, t: usize, n: usize) -> Result<S, QueueError> {
        let w = self.w;
        let end = t + n * w;
        let len = self.a_prefix.len() - 1;
        if end > len || n == 0 {
            return Err(QueueError::OutOfRange { needed: end, len });
        }
        let never_empty = q0 + self.a_sum(t, end) - self.x_sum(t, end);
        let emptied = |k: usize| match self.discipline {
            // Emptied at the start of period k, then only later periods count.
            QueueDiscipline::ClampAfter => self.a_sum(t + k * w, end) - self.x_sum(t + k * w, end),
            // Emptied by the service of period k, before its arrivals land.
            QueueDiscipline::ServeThenArrive => self.a_sum(t + k * w, end) - self.x_sum(t + (k + 1) * w, end),
        };
        let ks = match self.discipline {
            QueueDiscipline::ClampAfter => 1..n + 1,
            QueueDiscipline::ServeThenArrive => 0..n,
        };
        Ok(ks.map(emptied).fold(never_empty, S::max_of))
    }

    /// `q(t + n·w)` for `t < w` under zero initialization.
    pub fn zero_init(&self, t: usize, n: usize) -> Result<S, QueueError> {
        if t >= self.w {
            return Err(QueueError::OutOfRange { needed: t, len: self.w });
        }
        self.from_state(S::zero(), t, n)
    }
}

/// Closed-form `q(t + n·w)` under zero initialization, `t ∈ 0..w`, `n ≥ 1`.
pub fn closed_form_backlog<S: Scalar>(
    a: &[S],
    x: &[S],
    w: usize,
    t: usize,
    n: usize,
    discipline: QueueDiscipline,
) -> Result<S, QueueError> {
    SkipAhead::new(a, x, w, discipline)?.zero_init(t, n)
}

/// `(min(α+β), max α + min β, max(α+β))`; `None` for empty or unequal inputs.
pub fn max_plus_min<S: Scalar>(alpha: &[S], beta: &[S]) -> Option<(S, S, S)> {
    if alpha.len() != beta.len() {
        return None;
    }
    let sums: Vec<S> = alpha.iter().zip(beta).map(|(&a, &b)| a + b).collect();
    Some((min_elem(&sums)?, max_elem(alpha)? + min_elem(beta)?, max_elem(&sums)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    /// |q(t+1+nw) − q(t+nw)| ≤ 2X for t ≤ w−2.
    NextStep,
    /// |q(t+c+nw) − q(t+nw)| ≤ 2cX for t ≤ w−c−1.
    MultiStep,
    /// −2X ≤ q(nw) − q(nw−1) ≤ (w+2)X.
    WindowBoundary,
    /// −2cX ≤ q(nw) − q(nw−c) ≤ (w+2c)X.
    BackMultiple,
    /// q(nw+τ) ≥ q((n+1)w) − 2wX (even w) or − (2w−1)X (odd w).
    LookbackWindow,
    /// q(t−τ) ≥ q(t) − wX for τ < w.
    LookbackSlot,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementViolation {
    pub family: BoundFamily,
    /// Later slot of the compared pair.
    pub slot: usize,
    /// Earlier slot of the compared pair.
    pub reference: usize,
    /// q(slot) − q(reference).
    pub difference: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LookbackBounds<S> {
    /// Floor on q(nw+τ) when q((n+1)w) ≥ M.
    pub window_floor: S,
    /// Floor on q(t−τ) when q(t) ≥ M.
    pub slot_floor: S,
}

pub fn lookback_lower_bound<S: Scalar>(m: S, w: usize, x: S) -> LookbackBounds<S> {
    let span = if w.is_multiple_of(2) { 2 * w } else { 2 * w - 1 };
    LookbackBounds {
        window_floor: m - S::of(span) * x,
        slot_floor: m - S::of(w) * x,
    }
}

/// Checks every increment and lookback bound on a zero-initialized trace
/// whose arrivals and services lie in `[0, x_bound]`.
pub fn increment_audit<S: Scalar>(q: &[S], w: usize, x_bound: S) -> Vec<IncrementViolation> {
    let mut out = Vec::new();
    if w == 0 {
        return out;
    }
    let tol = S::tolerance();
    let mut check = |family, slot: usize, reference: usize, lower: S, upper: S| {
        let diff = q[slot] - q[reference];
        if diff < lower - tol || diff > upper + tol {
            out.push(IncrementViolation {
                family,
                slot,
                reference,
                difference: diff.as_f64(),
                lower: lower.as_f64(),
                upper: upper.as_f64(),
            });
        }
    };
    let len = q.len();
    let sw = S::of(w);
    for n in 1..=len / w {
        let base = n * w;
        for c in 1..w {
            let cx = S::of(2 * c) * x_bound;
            let family = if c == 1 {
                BoundFamily::NextStep
            } else {
                BoundFamily::MultiStep
            };
            for t in 0..w - c {
                if base + t + c < len {
                    check(family, base + t + c, base + t, -cx, cx);
                }
            }
            if base < len {
                let family = if c == 1 {
                    BoundFamily::WindowBoundary
                } else {
                    BoundFamily::BackMultiple
                };
                check(family, base, base - c, -cx, (sw + S::of(2 * c)) * x_bound);
            }
        }
    }
    let unbounded = S::of(len + 1) * x_bound * sw + S::one();
    for n in 0..len / w {
        let anchor = (n + 1) * w;
        if anchor >= len {
            break;
        }
        let floor = lookback_lower_bound(q[anchor], w, x_bound).window_floor;
        for tau in 0..w {
            let slot = n * w + tau;
            // Expressed as q(anchor) − q(slot) ≤ q(anchor) − floor.
            check(BoundFamily::LookbackWindow, anchor, slot, -unbounded, q[anchor] - floor);
        }
    }
    let slack = sw * x_bound;
    for t in 0..len {
        for tau in 1..w.min(t + 1) {
            check(BoundFamily::LookbackSlot, t, t - tau, -unbounded, slack);
        }
    }
    out
}

/// Per-slot record of one group's queues.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTrace<S> {
    pub id: GroupId,
    pub q: Vec<S>,
    pub z: Vec<S>,
    pub a: Vec<S>,
    pub x: Vec<S>,
}

impl<S: Scalar> GroupTrace<S> {
    pub fn indicator(&self, t: usize) -> bool {
        self.q[t] > S::zero()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueTrace<S> {
    pub groups: Vec<GroupTrace<S>>,
}

#[derive(Serialize)]
struct TraceRow {
    t: usize,
    group_id: u32,
    q_kw: f64,
    z: f64,
    indicator: u8,
}

impl<S: Scalar> QueueTrace<S> {
    pub fn num_slots(&self) -> usize {
        self.groups.first().map_or(0, |g| g.q.len())
    }

    /// Writes `t,group_id,q_kw,z,indicator`, one row per slot and group.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for t in 0..self.num_slots() {
            for g in &self.groups {
                wtr.serialize(TraceRow {
                    t,
                    group_id: g.id.0,
                    q_kw: g.q[t].as_f64(),
                    z: g.z[t].as_f64(),
                    indicator: u8::from(g.indicator(t)),
                })?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Snapshot<S> {
    q: S,
    z: S,
    a: S,
    x: S,
}

/// Queues of every group, advanced one slot at a time.
#[derive(Clone, Debug)]
pub struct QueueState<S> {
    w: usize,
    slot: usize,
    q: Vec<S>,
    z: Vec<S>,
    alpha_over_r: Vec<S>,
    history: Vec<VecDeque<Snapshot<S>>>,
    trace: QueueTrace<S>,
}

impl<S: Scalar> QueueState<S> {
    pub fn new(w: usize, ids: Vec<GroupId>, alpha_over_r: Vec<S>) -> Result<Self, QueueError> {
        if w == 0 {
            return Err(QueueError::ZeroLookahead);
        }
        if ids.len() != alpha_over_r.len() {
            return Err(QueueError::GroupCount {
                expected: ids.len(),
                got: alpha_over_r.len(),
            });
        }
        let n = ids.len();
        Ok(Self {
            w,
            slot: 0,
            q: vec![S::zero(); n],
            z: vec![S::zero(); n],
            alpha_over_r,
            history: vec![VecDeque::with_capacity(w + 1); n],
            trace: QueueTrace {
                groups: ids
                    .into_iter()
                    .map(|id| GroupTrace {
                        id,
                        q: vec![],
                        z: vec![],
                        a: vec![],
                        x: vec![],
                    })
                    .collect(),
            },
        })
    }

    pub fn for_scenario(s: &Scenario<S>) -> Result<Self, QueueError> {
        Self::new(
            s.lookahead,
            s.groups.iter().map(|g| g.id).collect(),
            s.groups
                .iter()
                .map(|g| g.alpha / S::of(g.parking_slots.max(1)))
                .collect(),
        )
    }

    /// Slot whose queue values are current.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn lookahead(&self) -> usize {
        self.w
    }

    pub fn q(&self) -> &[S] {
        &self.q
    }

    pub fn z(&self) -> &[S] {
        &self.z
    }

    /// Records slot `t`'s realized arrivals and implemented powers per group
    /// and moves the queues to `t + 1`.
    pub fn advance(&mut self, a: &[S], x: &[S]) -> Result<(), QueueError> {
        let n = self.q.len();
        for values in [a, x] {
            if values.len() != n {
                return Err(QueueError::GroupCount {
                    expected: n,
                    got: values.len(),
                });
            }
        }
        let next = self.slot + 1;
        for g in 0..n {
            let trace = &mut self.trace.groups[g];
            trace.q.push(self.q[g]);
            trace.z.push(self.z[g]);
            trace.a.push(a[g]);
            trace.x.push(x[g]);
            let ring = &mut self.history[g];
            ring.push_back(Snapshot {
                q: self.q[g],
                z: self.z[g],
                a: a[g],
                x: x[g],
            });
            if ring.len() > self.w {
                ring.pop_front();
            }
            if next >= self.w {
                let base = ring[0];
                let a_sum = ring.iter().fold(S::zero(), |acc, s| acc + s.a);
                let x_sum = ring.iter().fold(S::zero(), |acc, s| acc + s.x);
                let q = QueueDiscipline::ClampAfter.step(base.q, a_sum, x_sum);
                // Rounding residue left after exact service would otherwise keep
                // the backlog indicator on and grow z.
                let noise = S::tolerance() * (S::one() + base.q + a_sum + x_sum);
                self.q[g] = if q <= noise { S::zero() } else { q };
                let indicator = if base.q > S::zero() {
                    self.alpha_over_r[g]
                } else {
                    S::zero()
                };
                self.z[g] = (base.z - x_sum + indicator).pos();
            }
        }
        self.slot = next;
        Ok(())
    }

    /// Recorded history of slots `0..slot()`.
    pub fn trace(&self) -> &QueueTrace<S> {
        &self.trace
    }

    pub fn into_trace(self) -> QueueTrace<S> {
        self.trace
    }
}

/// Penalty weight V, shared or per group.
#[derive(Clone, Debug, PartialEq)]
pub enum Penalty<S> {
    Homogeneous(S),
    PerGroup(Vec<S>),
}

impl<S: Scalar> Penalty<S> {
    pub fn for_group(&self, g: usize) -> S {
        match self {
            Penalty::Homogeneous(v) => *v,
            Penalty::PerGroup(vs) => vs[g],
        }
    }

    /// Smallest weight in use.
    pub fn min(&self) -> S {
        match self {
            Penalty::Homogeneous(v) => *v,
            Penalty::PerGroup(vs) => min_elem(vs).unwrap_or_else(S::zero),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupConstants<S> {
    pub id: GroupId,
    pub v: S,
    pub x_cap: S,
    pub a_bound: S,
    pub alpha_over_r: S,
    /// Q_g = Vπ_max + 2wX_g.
    pub q_bound: S,
    /// Z_g = Vπ_max + 2α_g/R_g.
    pub z_bound: S,
    /// B_g1 = (w·max{X_g, A_g})².
    pub b1: S,
    /// B_g2 = (α_g/R_g)² + (wX_g)² + 2Z_g·α_g/R_g.
    pub b2: S,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundConstants<S> {
    pub w: usize,
    pub pi_max: S,
    pub groups: Vec<GroupConstants<S>>,
    /// B = ½ Σ_g (B_g1 + 2wQ_gA_g + B_g2).
    pub b: S,
}

pub fn bound_constants<S: Scalar>(
    s: &Scenario<S>,
    penalty: &Penalty<S>,
    w: usize,
) -> Result<BoundConstants<S>, QueueError> {
    if let Penalty::PerGroup(vs) = penalty {
        if vs.len() != s.groups.len() {
            return Err(QueueError::GroupCount {
                expected: s.groups.len(),
                got: vs.len(),
            });
        }
    }
    let pi_max = s.prices.pi_max();
    let sw = S::of(w);
    let two = S::lit(2.0);
    let groups: Vec<GroupConstants<S>> = s
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let v = penalty.for_group(i);
            let alpha_over_r = g.alpha / S::of(g.parking_slots.max(1));
            let q_bound = v * pi_max + two * sw * g.x_cap_total;
            let z_bound = v * pi_max + two * alpha_over_r;
            let b1 = {
                let m = sw * g.x_cap_total.max_of(g.a_bound);
                m * m
            };
            let wx = sw * g.x_cap_total;
            let b2 = alpha_over_r * alpha_over_r + wx * wx + two * z_bound * alpha_over_r;
            GroupConstants {
                id: g.id,
                v,
                x_cap: g.x_cap_total,
                a_bound: g.a_bound,
                alpha_over_r,
                q_bound,
                z_bound,
                b1,
                b2,
            }
        })
        .collect();
    let b = groups
        .iter()
        .fold(S::zero(), |acc, c| acc + c.b1 + two * sw * c.q_bound * c.a_bound + c.b2)
        / two;
    Ok(BoundConstants { w, pi_max, groups, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    const CLAMP: QueueDiscipline = QueueDiscipline::ClampAfter;
    const SERVE: QueueDiscipline = QueueDiscipline::ServeThenArrive;

    #[test]
    fn hand_worked_recursion() {
        let a = [3.0, 3.0, 0.0, 0.0];
        let x = [1.0; 4];
        let q = backlog_recursion(&a, &x, 2, CLAMP).unwrap();
        assert_eq!(q, vec![0.0, 0.0, 4.0, 1.0]);
        assert_eq!(closed_form_backlog(&a, &x, 2, 0, 1, CLAMP).unwrap(), 4.0);
        assert_eq!(closed_form_backlog(&a, &x, 2, 1, 1, CLAMP).unwrap(), 1.0);
        // Under serve-then-arrive the first period's service finds nothing.
        let q = backlog_recursion(&a, &x, 2, SERVE).unwrap();
        assert_eq!(q, vec![0.0, 0.0, 6.0, 3.0]);
    }

    #[test]
    fn balanced_flow_keeps_queue_empty() {
        let a = [2.0, 5.0, 1.0, 0.0, 3.0, 3.0];
        let q = backlog_recursion(&a, &a, 3, CLAMP).unwrap();
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clamp_at_zero() {
        let (q, z) = update_queues(5.0, 2.0, &[1.0, 1.0], &[8.0, 9.0], 0.5).unwrap();
        assert_eq!((q, z), (0.0, 0.0));
        let (q, z) = update_queues(0.0, 2.0, &[1.0], &[0.0], 0.5).unwrap();
        assert_eq!((q, z), (1.0, 2.0));
        let (_, z) = update_queues(1.0, 2.0, &[1.0], &[0.0], 0.5).unwrap();
        assert_eq!(z, 2.5);
        assert!(update_queues(0.0, 0.0, &[1.0], &[0.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn first_window_from_zeros() {
        let a = [4.0, 2.0, 7.0, 1.0, 0.0, 3.0];
        let x = [1.0, 0.0, 9.0, 5.0, 2.0, 2.0];
        // Arrivals of the first period all count when its service is ignored.
        assert_eq!(closed_form_backlog(&a, &x, 3, 0, 1, SERVE).unwrap(), 13.0);
        assert_eq!(closed_form_backlog(&a, &[0.0; 6], 3, 0, 1, CLAMP).unwrap(), 13.0);
        assert_eq!(closed_form_backlog(&a, &x, 3, 0, 1, CLAMP).unwrap(), 3.0);
    }

    #[test]
    fn general_form_single_period_is_one_step() {
        let a = [2.0, 1.0, 4.0, 0.5];
        let x = [3.0, 3.0, 0.0, 0.0];
        let sk = SkipAhead::new(&a, &x, 2, CLAMP).unwrap();
        for q0 in [0.0, 1.0, 10.0] {
            assert_eq!(sk.from_state(q0, 0, 1).unwrap(), CLAMP.step(q0, 3.0, 6.0));
            assert_eq!(sk.from_state(q0, 1, 1).unwrap(), CLAMP.step(q0, 5.0, 3.0));
        }
        let sk = SkipAhead::new(&a, &x, 2, SERVE).unwrap();
        for q0 in [0.0, 1.0, 10.0] {
            assert_eq!(sk.from_state(q0, 0, 1).unwrap(), SERVE.step(q0, 3.0, 6.0));
        }
        assert!(sk.from_state(0.0, 1, 2).is_err());
        assert!(sk.zero_init(2, 1).is_err());
    }

    #[test]
    fn exact_rational_closed_form() {
        let r = |n: i64, d: i64| Rational64::new(n, d);
        let a = [r(1, 3), r(2, 7), r(5, 2), r(0, 1), r(1, 9), r(4, 5), r(1, 2)];
        let x = [r(1, 2), r(1, 5), r(0, 1), r(3, 4), r(2, 3), r(1, 7), r(1, 1)];
        for d in [CLAMP, SERVE] {
            let q = backlog_recursion(&a, &x, 2, d).unwrap();
            let sk = SkipAhead::new(&a, &x, 2, d).unwrap();
            for t in 0..2 {
                for n in 1..=(a.len() - 1 - t) / 2 {
                    assert_eq!(sk.zero_init(t, n).unwrap(), q[t + 2 * n]);
                }
            }
        }
    }

    #[test]
    fn boundary_increment_at_full_arrivals() {
        let (w, x) = (4, 10.0);
        let a = vec![x; 16];
        let q = backlog_recursion(&a, &[0.0; 16], w, CLAMP).unwrap();
        assert_eq!(q[w] - q[w - 1], w as f64 * x);
        assert!(increment_audit(&q, w, x).is_empty());
    }

    #[test]
    fn audit_flags_a_forged_jump() {
        let mut q = vec![0.0; 12];
        q[7] = 100.0;
        let v = increment_audit(&q, 3, 1.0);
        assert!(v.iter().any(|e| e.family == BoundFamily::NextStep));
        assert!(v.iter().any(|e| e.family == BoundFamily::LookbackSlot));
    }

    #[test]
    fn lookback_substitution() {
        let even = lookback_lower_bound(100.0, 4, 10.0);
        assert_eq!((even.window_floor, even.slot_floor), (20.0, 60.0));
        let odd = lookback_lower_bound(100.0, 3, 10.0);
        assert_eq!((odd.window_floor, odd.slot_floor), (50.0, 70.0));
    }

    #[test]
    fn max_plus_min_sandwich() {
        let (lo, mid, hi) = max_plus_min(&[1.0, -2.0, 4.0], &[0.5, 3.0, -1.0]).unwrap();
        assert!(lo <= mid && mid <= hi);
        assert_eq!((lo, mid, hi), (1.0, 3.0, 3.0));
        assert!(max_plus_min::<f64>(&[], &[]).is_none());
        assert!(max_plus_min(&[1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn state_matches_pure_recursion() {
        let a = [3.0, 3.0, 0.0, 0.0, 2.0, 1.0, 0.0];
        let x = [1.0, 1.0, 1.0, 1.0, 0.0, 4.0, 1.0];
        let mut st = QueueState::new(2, vec![GroupId(7)], vec![0.5]).unwrap();
        for t in 0..a.len() {
            st.advance(&[a[t]], &[x[t]]).unwrap();
        }
        let expected = backlog_recursion(&a, &x, 2, CLAMP).unwrap();
        assert_eq!(st.trace().groups[0].q, expected);
        let z = &st.trace().groups[0].z;
        assert_eq!(&z[..2], &[0.0, 0.0]);
        // z(2) = max{0 − 2 + 0, 0}; z(4) = max{z(2) − 2 + 0.5, 0} since q(2) > 0.
        assert_eq!(z[2], 0.0);
        assert_eq!(z[4], 0.0);
        assert!(st.advance(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn z_grows_while_backlogged() {
        let mut st = QueueState::new(1, vec![GroupId(0)], vec![0.25]).unwrap();
        for _ in 0..5 {
            st.advance(&[1.0], &[0.0]).unwrap();
        }
        assert_eq!(st.z()[0], 1.0);
        assert_eq!(st.q()[0], 5.0);
    }

    #[test]
    fn trace_csv_layout() {
        let mut st = QueueState::new(1, vec![GroupId(3)], vec![1.0]).unwrap();
        st.advance(&[2.0], &[0.0]).unwrap();
        st.advance(&[0.0], &[0.0]).unwrap();
        let mut buf = Vec::new();
        st.trace().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,group_id,q_kw,z,indicator\n0,3,0.0,0.0,0\n1,3,2.0,0.0,1\n");
    }
}
