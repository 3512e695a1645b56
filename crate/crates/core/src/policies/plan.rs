//! Drift-plus-penalty window plans and their buffered average.

use std::collections::VecDeque;

use crate::queues::Penalty;
use crate::scalar::Scalar;

/// Power plan of every group over one lookahead window.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan<S> {
    pub base_slot: usize,
    pub horizon: usize,
    /// `x[g][τ]` is the planned power of group `g` at `base_slot + τ`.
    pub x: Vec<Vec<S>>,
}

impl<S: Scalar> Plan<S> {
    /// Planned power of group `g` at absolute slot `t`, if covered.
    pub fn at(&self, g: usize, t: usize) -> Option<S> {
        t.checked_sub(self.base_slot)
            .filter(|&tau| tau < self.horizon)
            .map(|tau| self.x[g][tau])
    }
}

/// The most recent `w` plans, oldest first.
#[derive(Clone, Debug)]
pub struct PlanBuffer<S> {
    w: usize,
    plans: VecDeque<Plan<S>>,
}

impl<S: Scalar> PlanBuffer<S> {
    pub fn new(w: usize) -> Self {
        Self {
            w: w.max(1),
            plans: VecDeque::with_capacity(w + 1),
        }
    }

    pub fn lookahead(&self) -> usize {
        self.w
    }

    pub fn push(&mut self, plan: Plan<S>) {
        self.plans.push_back(plan);
        while self.plans.len() > self.w {
            self.plans.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn plans(&self) -> impl Iterator<Item = &Plan<S>> {
        self.plans.iter()
    }
}

/// Coefficient of x_g(t+τ) in the window objective.
fn coefficient<S: Scalar>(v: S, price: S, q: S, z: S) -> S {
    v * price - q - z
}

/// Minimizes Σ_g Σ_τ (V_g π(t+τ) − q_g − z_g)·x_g(t+τ) over the box
/// `0 ≤ x ≤ cap`. A zero coefficient plans zero.
pub fn plan_with_penalty<S: Scalar>(
    q: &[S],
    z: &[S],
    base_slot: usize,
    prices: &[S],
    caps: &[Vec<S>],
    penalty: &Penalty<S>,
) -> Plan<S> {
    let horizon = prices.len();
    let x = caps
        .iter()
        .enumerate()
        .map(|(g, cap)| {
            let v = penalty.for_group(g);
            (0..horizon)
                .map(|tau| {
                    if coefficient(v, prices[tau], q[g], z[g]) < S::zero() {
                        cap[tau]
                    } else {
                        S::zero()
                    }
                })
                .collect()
        })
        .collect();
    Plan { base_slot, horizon, x }
}

/// Homogeneous-penalty window plan.
pub fn plan_dpp<S: Scalar>(q: &[S], z: &[S], base_slot: usize, prices: &[S], caps: &[Vec<S>], v: S) -> Plan<S> {
    plan_with_penalty(q, z, base_slot, prices, caps, &Penalty::Homogeneous(v))
}

/// Window plan with one penalty weight per group.
pub fn plan_dpp_hetero<S: Scalar>(
    q: &[S],
    z: &[S],
    base_slot: usize,
    prices: &[S],
    caps: &[Vec<S>],
    v: &[S],
) -> Plan<S> {
    plan_with_penalty(q, z, base_slot, prices, caps, &Penalty::PerGroup(v.to_vec()))
}

/// Objective value of `plan` under the window coefficients.
pub fn dpp_objective<S: Scalar>(q: &[S], z: &[S], prices: &[S], penalty: &Penalty<S>, plan: &Plan<S>) -> S {
    plan.x.iter().enumerate().fold(S::zero(), |acc, (g, row)| {
        row.iter().enumerate().fold(acc, |acc, (tau, &x)| {
            acc + coefficient(penalty.for_group(g), prices[tau], q[g], z[g]) * x
        })
    })
}

/// x_g(t) = (1/w) Σ_τ x̂_g^{(t−τ)}(t) over buffered plans covering `t`;
/// plans that do not exist yet count as zero.
pub fn buffered_average<S: Scalar>(buffer: &PlanBuffer<S>, groups: usize, t: usize) -> Vec<S> {
    let w = S::of(buffer.lookahead());
    (0..groups)
        .map(|g| {
            buffer
                .plans()
                .filter_map(|p| p.at(g, t))
                .fold(S::zero(), |acc, x| acc + x)
                / w
        })
        .collect()
}
