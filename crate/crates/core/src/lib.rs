//! Forecast-aware drift-plus-penalty scheduling for EV fleets.
//!
//! The model is generic over the scalar type. [`Real`] is the default;
//! [`Exact`] runs the same code in rational arithmetic for oracle tests.

pub mod aggregation;
pub mod demand;
pub mod flow;
pub mod io;
pub mod model;
pub mod policies;
pub mod queues;
pub mod scalar;

pub use demand::{attach_demand, DemandProfile};
pub use model::{validate_scenario, Ev, EvId, Group, GroupId, PriceSeries, Scenario, TimeGrid};
pub use policies::{simulate, Policy, RunReport, SimParams};
pub use queues::{Penalty, QueueState, QueueTrace};
pub use scalar::Scalar;

pub type Real = f64;
pub type Single = f32;
pub type Exact = num_rational::Rational64;

pub type Scenario64 = Scenario<Real>;
pub type ExactScenario = Scenario<Exact>;
