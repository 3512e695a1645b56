//! Window bounds on aggregate power and the per-window feasibility check.
//!
//! For a slot set `U`, every per-EV feasible schedule satisfies
//! `lower(U) ≤ Σ_{t∈U} x(t) ≤ upper(U)` with
//!
//! ```text
//! lower(U) = Σ_v max{0, h̲_v − P_v·|𝒰_v \ U|}
//! upper(U) = Σ_v min{h̄_v, P_v·|𝒰_v ∩ U|}
//! ```
//!
//! where `h̲_v = E_req/(ηΔt)` and `h̄_v = E_max/(ηΔt)`. An aggregate schedule
//! that satisfies the pair for every `U` can be split back into EV schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Ev, GroupId, ModelError, Scenario};
use crate::scalar::{max_elem, min_elem, Scalar};

/// Largest horizon for which every subset is enumerated.
pub const EXHAUSTIVE_MAX_SLOTS: usize = 20;

/// Random subsets drawn in sampled mode when none is configured.
pub const DEFAULT_RANDOM_SUBSETS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("exhaustive subset check needs at most {EXHAUSTIVE_MAX_SLOTS} slots, got {0}")]
    TooManySlots(usize),
    #[error("slot {0} is outside the horizon")]
    SlotOutOfRange(usize),
    #[error("schedule has {got} entries, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowBounds<S> {
    pub lower: S,
    pub upper: S,
    pub window: Vec<usize>,
}

fn ev_bounds<S: Scalar>(ev: &Ev<S>, inside: usize, eta: S, dt: S) -> (S, S) {
    let outside = ev.parking_slots() - inside;
    let lower = (ev.req_units(eta, dt) - ev.p_max * S::of(outside)).pos();
    let upper = ev.max_units(eta, dt).min_of(ev.p_max * S::of(inside));
    (lower, upper)
}

fn bounds_with<S: Scalar>(s: &Scenario<S>, members: &[usize], contains: impl Fn(usize) -> bool) -> (S, S) {
    members.iter().fold((S::zero(), S::zero()), |(lo, hi), &i| {
        let ev = &s.fleet[i];
        let inside = (ev.arrival_slot..ev.departure_slot).filter(|&t| contains(t)).count();
        let (l, u) = ev_bounds(ev, inside, s.eta, s.dt());
        (lo + l, hi + u)
    })
}

/// Bounds on Σ_{t∈U} x_g(t) for the slot set `window`.
pub fn window_bounds<S: Scalar>(
    s: &Scenario<S>,
    g: GroupId,
    window: &[usize],
) -> Result<WindowBounds<S>, AggregationError> {
    let group = s.group(g)?;
    let mut member = vec![false; s.num_slots()];
    for &t in window {
        *member.get_mut(t).ok_or(AggregationError::SlotOutOfRange(t))? = true;
    }
    let (lower, upper) = bounds_with(s, &group.members, |t| member[t]);
    let mut window = window.to_vec();
    window.sort_unstable();
    window.dedup();
    Ok(WindowBounds { lower, upper, window })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    /// All 2^T subsets; requires T ≤ [`EXHAUSTIVE_MAX_SLOTS`].
    Exhaustive,
    /// Every contiguous window followed by `random_subsets` random subsets.
    Sampled { random_subsets: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundSide {
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq)]
pub enum P3Verdict<S> {
    Feasible,
    Infeasible {
        bounds: WindowBounds<S>,
        /// Σ_{t∈U} x(t).
        total: S,
        side: BoundSide,
    },
}

impl<S> P3Verdict<S> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, P3Verdict::Feasible)
    }

    pub fn witness(&self) -> Option<&[usize]> {
        match self {
            P3Verdict::Feasible => None,
            P3Verdict::Infeasible { bounds, .. } => Some(&bounds.window),
        }
    }
}

struct WindowChecker<'a, S> {
    s: &'a Scenario<S>,
    members: &'a [usize],
    x: &'a [S],
    member: Vec<bool>,
}

impl<S: Scalar> WindowChecker<'_, S> {
    /// Returns the violated side for `window`, if any.
    fn check(&mut self, window: &[usize]) -> Option<(BoundSide, S, S, S)> {
        self.member.iter_mut().for_each(|m| *m = false);
        for &t in window {
            self.member[t] = true;
        }
        let member = &self.member;
        let (lower, upper) = bounds_with(self.s, self.members, |t| member[t]);
        let total = window.iter().fold(S::zero(), |acc, &t| acc + self.x[t]);
        if !total.le_tol(upper) {
            Some((BoundSide::Upper, lower, upper, total))
        } else if !lower.le_tol(total) {
            Some((BoundSide::Lower, lower, upper, total))
        } else {
            None
        }
    }
}

fn infeasible<S>(window: Vec<usize>, (side, lower, upper, total): (BoundSide, S, S, S)) -> P3Verdict<S> {
    P3Verdict::Infeasible {
        bounds: WindowBounds { lower, upper, window },
        total,
        side,
    }
}

/// Advance `combo` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let Some(i) = (0..k).rev().find(|&i| combo[i] < n - k + i) else {
        return false;
    };
    combo[i] += 1;
    for j in i + 1..k {
        combo[j] = combo[j - 1] + 1;
    }
    true
}

/// Tests `x` against the window constraints of group `g`.
///
/// Exhaustive mode reports the first violation ordered by window size, then
/// upper-bound violations before lower-bound ones, then lexicographically.
/// Sampled mode reports the first violation in checking order: contiguous
/// windows by length and start, then the random subsets.
pub fn check_p3_feasible<S: Scalar>(
    s: &Scenario<S>,
    g: GroupId,
    x: &[S],
    mode: CheckMode,
) -> Result<P3Verdict<S>, AggregationError> {
    let horizon = s.num_slots();
    if x.len() != horizon {
        return Err(AggregationError::LengthMismatch {
            got: x.len(),
            expected: horizon,
        });
    }
    if mode == CheckMode::Exhaustive && horizon > EXHAUSTIVE_MAX_SLOTS {
        return Err(AggregationError::TooManySlots(horizon));
    }
    let group = s.group(g)?;
    let mut checker = WindowChecker {
        s,
        members: &group.members,
        x,
        member: vec![false; horizon],
    };
    match mode {
        CheckMode::Exhaustive => {
            for k in 0..=horizon {
                let mut combo: Vec<usize> = (0..k).collect();
                let mut lower_hit = None;
                loop {
                    match checker.check(&combo) {
                        Some(hit @ (BoundSide::Upper, ..)) => return Ok(infeasible(combo, hit)),
                        Some(hit) if lower_hit.is_none() => lower_hit = Some((combo.clone(), hit)),
                        _ => {}
                    }
                    if !next_combination(&mut combo, horizon) {
                        break;
                    }
                }
                if let Some((window, hit)) = lower_hit {
                    return Ok(infeasible(window, hit));
                }
            }
        }
        CheckMode::Sampled { random_subsets, seed } => {
            for len in 1..=horizon {
                for start in 0..=horizon - len {
                    let window: Vec<usize> = (start..start + len).collect();
                    if let Some(hit) = checker.check(&window) {
                        return Ok(infeasible(window, hit));
                    }
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..random_subsets {
                let window: Vec<usize> = (0..horizon).filter(|_| rng.random_bool(0.5)).collect();
                if let Some(hit) = checker.check(&window) {
                    return Ok(infeasible(window, hit));
                }
            }
        }
    }
    Ok(P3Verdict::Feasible)
}

/// Upper bound on the cost gap between the exact aggregate problem and its
/// long-run relaxation:
/// `(1/(ηTΔt)) Σ_v E_req · (max_{t∈𝒰_v} π(t) − min_{t∈𝒰_v} π(t))`.
pub fn relaxation_gap_bound<S: Scalar>(s: &Scenario<S>) -> S {
    let prices = s.prices.prices();
    let total = s.fleet.iter().fold(S::zero(), |acc, ev| {
        let end = ev.departure_slot.min(prices.len());
        let window = &prices[ev.arrival_slot.min(end)..end];
        let spread = match (max_elem(window), min_elem(window)) {
            (Some(hi), Some(lo)) => hi - lo,
            _ => S::zero(),
        };
        acc + ev.e_req * spread
    });
    total / (s.eta * S::of(s.num_slots()) * s.dt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::two_ev;
    use crate::model::{EvId, PriceSeries, TimeGrid};

    const G: GroupId = GroupId(0);

    /// All per-EV schedules on a grid of `steps` levels per slot, feasible
    /// for the EV's own window, power and energy limits.
    fn ev_schedules(ev: &Ev<f64>, horizon: usize, steps: usize) -> Vec<Vec<f64>> {
        let levels: Vec<f64> = (0..=steps).map(|k| ev.p_max * k as f64 / steps as f64).collect();
        let mut out = vec![vec![]];
        for t in 0..horizon {
            let choices: Vec<f64> = if ev.is_active(t) { levels.clone() } else { vec![0.0] };
            out = out
                .into_iter()
                .flat_map(|p| {
                    choices.iter().map(move |&c| {
                        let mut q = p.clone();
                        q.push(c);
                        q
                    })
                })
                .collect();
        }
        out.retain(|p| {
            let e: f64 = p.iter().sum();
            e >= ev.e_req - 1e-12 && e <= ev.e_max + 1e-12
        });
        out
    }

    #[test]
    fn two_ev_window_bounds_match_enumeration() {
        let s = two_ev::<f64>([2.0, 1.0]);
        let b = window_bounds(&s, G, &[1]).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 1.0));
        // Per-EV extremes of Σ_{t∈U} p_v(t) over enumerated schedules.
        for window in [vec![], vec![0], vec![1], vec![0, 1]] {
            let (mut lo, mut hi) = (0.0, 0.0);
            for ev in &s.fleet {
                let sums: Vec<f64> = ev_schedules(ev, 2, 4)
                    .iter()
                    .map(|p| window.iter().map(|&t| p[t]).sum())
                    .collect();
                lo += sums.iter().cloned().fold(f64::INFINITY, f64::min);
                hi += sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
            let b = window_bounds(&s, G, &window).unwrap();
            assert_eq!((b.lower, b.upper), (lo, hi), "window {window:?}");
        }
    }

    #[test]
    fn full_and_empty_windows() {
        let s = two_ev::<f64>([2.0, 1.0]);
        let full = window_bounds(&s, G, &[0, 1]).unwrap();
        assert_eq!((full.lower, full.upper), (2.0, 2.0));
        let empty = window_bounds(&s, G, &[]).unwrap();
        assert_eq!((empty.lower, empty.upper), (0.0, 0.0));
        assert!(window_bounds(&s, G, &[2]).is_err());
        assert!(window_bounds(&s, GroupId(1), &[0]).is_err());
    }

    #[test]
    fn cheapest_late_schedule_is_not_disaggregable() {
        let s = two_ev::<f64>([2.0, 1.0]);
        let v = check_p3_feasible(&s, G, &[0.0, 2.0], CheckMode::Exhaustive).unwrap();
        match v {
            P3Verdict::Infeasible { bounds, total, side } => {
                assert_eq!(bounds.window, vec![1]);
                assert_eq!((bounds.upper, total, side), (1.0, 2.0, BoundSide::Upper));
            }
            P3Verdict::Feasible => panic!("expected a violation"),
        }
    }

    #[test]
    fn balanced_schedule_passes_every_subset() {
        let s = two_ev::<f64>([2.0, 1.0]);
        let v = check_p3_feasible(&s, G, &[1.0, 1.0], CheckMode::Exhaustive).unwrap();
        assert!(v.is_feasible());
        // Same verdict from the enumeration oracle: EV1 = (1,0), EV2 = (0,1).
        let sampled = check_p3_feasible(
            &s,
            G,
            &[1.0, 1.0],
            CheckMode::Sampled {
                random_subsets: 16,
                seed: 3,
            },
        )
        .unwrap();
        assert!(sampled.is_feasible());
    }

    #[test]
    fn zero_schedule_fails_on_full_horizon() {
        // One EV that can finish in either slot: only U ⊇ 𝒰_v forces energy.
        let ev = Ev {
            id: EvId(1),
            group_id: G,
            p_max: 2.0,
            e_req: 1.0,
            e_max: 1.0,
            e_cap: 2.0,
            arrival_slot: 0,
            departure_slot: 2,
        };
        let prices = PriceSeries::new(vec![1.0, 1.0]).unwrap();
        let s = Scenario::new(TimeGrid::new(2, 1.0), vec![ev], prices, 1.0, 1, 1.0);
        let v = check_p3_feasible(&s, G, &[0.0, 0.0], CheckMode::Exhaustive).unwrap();
        assert_eq!(v.witness(), Some(&[0usize, 1][..]));
        assert!(matches!(
            v,
            P3Verdict::Infeasible {
                side: BoundSide::Lower,
                ..
            }
        ));
    }

    #[test]
    fn exhaustive_refuses_long_horizons() {
        let prices = PriceSeries::new(vec![1.0; 21]).unwrap();
        let s: Scenario<f64> = Scenario::new(TimeGrid::new(21, 1.0), vec![], prices, 1.0, 1, 1.0);
        assert_eq!(
            check_p3_feasible(&s, G, &[0.0; 21], CheckMode::Exhaustive),
            Err(AggregationError::TooManySlots(21))
        );
    }

    #[test]
    fn lexicographic_combinations() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(
            seen,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    fn gap_scenario(prices: Vec<f64>, evs: Vec<(f64, usize, usize)>) -> Scenario<f64> {
        let horizon = prices.len();
        let fleet = evs
            .into_iter()
            .enumerate()
            .map(|(i, (e_req, a, d))| Ev {
                id: EvId(i as u32),
                group_id: GroupId(i as u32),
                p_max: 100.0,
                e_req,
                e_max: e_req,
                e_cap: e_req,
                arrival_slot: a,
                departure_slot: d,
            })
            .collect();
        Scenario::new(
            TimeGrid::new(horizon, 1.0),
            fleet,
            PriceSeries::new(prices).unwrap(),
            1.0,
            1,
            1.0,
        )
    }

    #[test]
    fn gap_bound_flat_prices_is_zero() {
        let s = gap_scenario(vec![0.2; 4], vec![(10.0, 0, 4)]);
        assert_eq!(relaxation_gap_bound(&s), 0.0);
    }

    #[test]
    fn gap_bound_single_ev() {
        let s = gap_scenario(vec![0.1, 0.3], vec![(10.0, 0, 2)]);
        // Oracle: largest π(t1) − π(t2) over all slot pairs in the window.
        let prices = [0.1, 0.3];
        let spread = (0..2)
            .flat_map(|a| (0..2).map(move |b| prices[a] - prices[b]))
            .fold(f64::NEG_INFINITY, f64::max);
        let expected = 10.0 * spread / 2.0;
        assert!((relaxation_gap_bound(&s) - expected).abs() < 1e-12);
        assert!((expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_bound_is_additive() {
        let prices = vec![0.1, 0.3, 0.2, 0.5];
        let a = gap_scenario(prices.clone(), vec![(10.0, 0, 2)]);
        let b = gap_scenario(prices.clone(), vec![(4.0, 1, 4)]);
        let both = gap_scenario(prices, vec![(10.0, 0, 2), (4.0, 1, 4)]);
        let sum = relaxation_gap_bound(&a) + relaxation_gap_bound(&b);
        assert!((relaxation_gap_bound(&both) - sum).abs() < 1e-12);
    }
}
