//! Planners, baselines and the simulation loop.

pub mod baseline;
pub mod bounds;
pub mod mpc;
pub mod plan;
pub mod simulate;

pub use baseline::{offline_p2, plan_greedy, schedule_cost, InfeasibleScenario, OfflineSchedule};
pub use bounds::{delay_bound, gap_bound, BoundError, DelayBound};
pub use mpc::{plan_mpc, MpcPlan, MpcState};
pub use plan::{buffered_average, dpp_objective, plan_dpp, plan_dpp_hetero, Plan, PlanBuffer};
pub use simulate::{simulate, Policy, RunReport, SimError, SimParams, SUMMARY_HEADER};
