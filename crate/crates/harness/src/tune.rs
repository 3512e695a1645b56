//! Search for the largest penalty weight that still serves every EV.

use lyapcharge::demand::DemandProfile;
use lyapcharge::policies::{RunReport, SimError};
use lyapcharge::{Policy, Scenario};
use thiserror::Error;

use crate::run::{run_policy, PenaltySetting};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuneError {
    #[error("demand is not fully served even at V = {lower}")]
    NoFeasible { lower: f64 },
    #[error("resolution must be positive and the upper bound non-negative")]
    BadBounds,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Search {
    pub upper: f64,
    pub resolution: f64,
}

impl Default for Search {
    fn default() -> Self {
        Self {
            upper: 100.0,
            resolution: 0.1,
        }
    }
}

fn group_served(report: &RunReport, g: usize) -> bool {
    let id = report.groups[g].id;
    report
        .evs
        .iter()
        .filter(|e| e.group == id)
        .all(|e| e.completed_slot.is_some())
}

/// Bisects on the grid `k·resolution` for the largest V under which every EV
/// completes. The result is feasible and, unless it equals the upper bound,
/// V + resolution is not.
pub fn find_optimal_v(
    s: &Scenario<f64>,
    demand: &DemandProfile<f64>,
    w: usize,
    forecast: Option<&[f64]>,
    search: Search,
) -> Result<f64, TuneError> {
    let per_group = find_v(s, demand, w, forecast, search, false)?;
    Ok(per_group[0])
}

/// One weight per group. Groups do not interact, so every group is bisected
/// from the same simulations.
pub fn find_optimal_v_per_group(
    s: &Scenario<f64>,
    demand: &DemandProfile<f64>,
    w: usize,
    forecast: Option<&[f64]>,
    search: Search,
) -> Result<Vec<f64>, TuneError> {
    find_v(s, demand, w, forecast, search, true)
}

fn find_v(
    s: &Scenario<f64>,
    demand: &DemandProfile<f64>,
    w: usize,
    forecast: Option<&[f64]>,
    search: Search,
    per_group: bool,
) -> Result<Vec<f64>, TuneError> {
    if !(search.resolution > 0.0 && search.upper >= 0.0) {
        return Err(TuneError::BadBounds);
    }
    let groups = if per_group { s.groups.len() } else { 1 };
    let res = search.resolution;
    let top = (search.upper / res).floor() as u64;
    let served = |ks: &[u64]| -> Result<Vec<bool>, TuneError> {
        let vs: Vec<f64> = ks.iter().map(|&k| k as f64 * res).collect();
        let (policy, setting) = if per_group {
            (Policy::DppHetero, PenaltySetting::PerGroup(vs))
        } else {
            (Policy::Dpp, PenaltySetting::Homogeneous(vs[0]))
        };
        let report = run_policy(s, demand, policy, w, &setting, forecast)?;
        Ok(if per_group {
            (0..groups).map(|g| group_served(&report, g)).collect()
        } else {
            vec![report.all_served()]
        })
    };
    if served(&vec![0; groups])?.iter().any(|ok| !ok) {
        return Err(TuneError::NoFeasible { lower: 0.0 });
    }
    let mut lo = vec![0u64; groups];
    let mut hi = vec![top + 1; groups];
    let at_top = served(&vec![top; groups])?;
    for g in 0..groups {
        if at_top[g] {
            lo[g] = top;
        } else {
            hi[g] = top;
        }
    }
    while (0..groups).any(|g| hi[g] - lo[g] > 1) {
        let mid: Vec<u64> = (0..groups)
            .map(|g| {
                if hi[g] - lo[g] > 1 {
                    lo[g] + (hi[g] - lo[g]) / 2
                } else {
                    lo[g]
                }
            })
            .collect();
        let ok = served(&mid)?;
        for g in 0..groups {
            if hi[g] - lo[g] > 1 {
                if ok[g] {
                    lo[g] = mid[g];
                } else {
                    hi[g] = mid[g];
                }
            }
        }
    }
    Ok(lo.into_iter().map(|k| k as f64 * res).collect())
}
