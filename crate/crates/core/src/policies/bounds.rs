//! Analytic delay and optimality-gap bounds.

use serde::Serialize;
use thiserror::Error;

use crate::model::Group;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum BoundError {
    #[error("delay weight alpha must be positive")]
    ZeroAlpha,
    #[error("penalty weight V must be positive")]
    ZeroPenalty,
    #[error("lookahead must be at least 1")]
    ZeroLookahead,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DelayBound<S> {
    /// wR_g(Q_g + Z_g)/α_g.
    pub slots: S,
    pub hours: S,
    /// wR_g(2Vπ_max + 2wX_g + 2α_g/R_g)/α_g.
    pub closed_form_slots: S,
    pub closed_form_hours: S,
}

/// Worst-case service delay of group `g`.
pub fn delay_bound<S: Scalar>(
    g: &Group<S>,
    w: usize,
    q_bound: S,
    z_bound: S,
    v_pi_max: S,
    slot_hours: S,
) -> Result<DelayBound<S>, BoundError> {
    if g.alpha <= S::zero() {
        return Err(BoundError::ZeroAlpha);
    }
    let (sw, r) = (S::of(w), S::of(g.parking_slots));
    let two = S::lit(2.0);
    let scale = sw * r / g.alpha;
    let slots = scale * (q_bound + z_bound);
    let closed = scale * (two * v_pi_max + two * sw * g.x_cap_total + two * g.alpha / r);
    Ok(DelayBound {
        slots,
        hours: slots * slot_hours,
        closed_form_slots: closed,
        closed_form_hours: closed * slot_hours,
    })
}

/// B/(wV); pass the smallest group weight for per-group penalties.
pub fn gap_bound<S: Scalar>(b: S, w: usize, v: S) -> Result<S, BoundError> {
    if w == 0 {
        return Err(BoundError::ZeroLookahead);
    }
    if v <= S::zero() {
        return Err(BoundError::ZeroPenalty);
    }
    Ok(b / (S::of(w) * v))
}
