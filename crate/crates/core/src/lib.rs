//! Scenario model, simulator, attacker identification and adversarial
//! trajectory selection for stress-testing driving policies.

pub mod adversary;
pub mod attack;
pub mod corpus;
pub mod error;
pub mod geometry;
pub mod identifier;
pub mod io;
pub mod metrics;
pub mod plan;
pub mod report;
pub mod scenario;
pub mod sim;

pub use error::{AdversaryError, IdentifyError, MetricsError, ScenarioError, SimError};
pub use scenario::{Dims, RoadGeometry, RoadTemplate, Scenario, ScenarioSet, Split, Track, VehicleState};
