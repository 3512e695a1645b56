//! One policy run with user-facing penalty units.

use lyapcharge::demand::DemandProfile;
use lyapcharge::policies::{RunReport, SimError};
use lyapcharge::{simulate, Penalty, Policy, Scenario, SimParams};
use serde::{Deserialize, Serialize};

/// User-facing weights treat queues in MW against prices in USD/MWh. The core
/// keeps kW and USD/kWh, so V is multiplied by this factor before planning.
pub const V_SCALE: f64 = 1.0e6;

/// α in MW per period on the user side, kW in the core.
pub const ALPHA_SCALE: f64 = 1.0e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PenaltySetting {
    Homogeneous(f64),
    PerGroup(Vec<f64>),
}

impl PenaltySetting {
    fn scaled(&self) -> Penalty<f64> {
        match self {
            PenaltySetting::Homogeneous(v) => Penalty::Homogeneous(v * V_SCALE),
            PenaltySetting::PerGroup(vs) => Penalty::PerGroup(vs.iter().map(|v| v * V_SCALE).collect()),
        }
    }
}

/// Simulates `policy` and reports penalty weights in user units.
pub fn run_policy(
    s: &Scenario<f64>,
    demand: &DemandProfile<f64>,
    policy: Policy,
    w: usize,
    penalty: &PenaltySetting,
    forecast: Option<&[f64]>,
) -> Result<RunReport, SimError> {
    let mut params = SimParams::new(policy, w, penalty.scaled());
    if let Some(f) = forecast {
        params = params.with_forecast(f.to_vec());
    }
    let mut report = simulate(s, demand, &params)?;
    report.v = report.v.map(|v| v / V_SCALE);
    report.alpha /= ALPHA_SCALE;
    for v in &mut report.v_groups {
        *v /= V_SCALE;
    }
    for g in &mut report.groups {
        g.v = g.v.map(|v| v / V_SCALE);
    }
    Ok(report)
}
