//! LR-FHSS uplink message-replication toolkit.
//!
//! The crate models the delivery of LR-FHSS messages from a dense population
//! of IoT nodes to a satellite gateway under pure-ALOHA contention, and the
//! two ways a device can spend extra airtime to protect a high-priority
//! message: sending the whole frame several times (frame replication) or
//! repeating every payload fragment inside one longer frame (fragment
//! replication).
//!
//! Four layers build on each other:
//!
//! - [`frame`]: DR8/DR9 profiles, fragment geometry, time-on-air.
//! - [`scheme`]: the replication strategies behind one trait, registered by
//!   name and selected at runtime.
//! - [`analytic`] and [`sim`]: the closed-form delivery/energy model and an
//!   independent Monte Carlo collision simulator that cross-validate each
//!   other.
//! - [`experiment`] and [`report`]: parameter sweeps over
//!   (data rate, scheme, r, node count) grids, CSV output, and plot-ready
//!   figure datasets.

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod frame;
pub mod report;
pub mod scheme;
pub mod sim;

pub use analytic::{delivery_report, DeliveryReport};
pub use error::{Error, Result};
pub use experiment::{run_sweep, Figure, Metric, SweepRecord, SweepSpec};
pub use frame::{dbm_to_watts, DataRateProfile, DrId, FrameGeometry, Scenario, ScenarioConfig};
pub use scheme::{ReplicationScheme, SchemeKind};
pub use sim::{run_monte_carlo, MdpEstimate};
