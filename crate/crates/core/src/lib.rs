//! Communication-cost laboratory for distributed storage in a single wireless
//! cell with periodic repair.
//!
//! Mobile nodes churn in and out of the cell; a file is spread over `n` of
//! them with an erasure or regenerating code. Requests are served
//! device-to-device when enough storage nodes remain and by the base station
//! otherwise. Lost fragments are restored every `Δ` time units.
//!
//! - [`model`]: network parameters and code-family profiles.
//! - [`analytic`]: closed-form expected repair/download/total cost.
//! - [`simulate`]: discrete-event Monte Carlo of the same cell.
//! - [`experiments`]: sweeps, `Δ_max` search and optimal repair interval.

pub mod analytic;
pub mod experiments;
pub mod model;
pub mod quadrature;
pub mod simulate;
mod stats;

pub use analytic::{AnalyticError, CostBreakdown, RepairSplit};
pub use experiments::{CurveRow, CurveTable, DeltaMaxResult, Engine, OptimalDelta, RhoSweepRow};
pub use model::{CodeFamily, ModelError, NetworkParams, StorageCode, ValidationReport, Violation};
pub use simulate::{Estimator, SimConfig, SimError, SimulationResult};
