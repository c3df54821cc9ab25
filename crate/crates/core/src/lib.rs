//! Predictive mobility management for 802.11 access-point grids.
//!
//! The crate models a rectangular grid of access points laid inside a grid
//! of location regions, the free-space radio environment around them, the
//! mobile nodes that roam across them, and the machinery a central path
//! prediction server uses to anticipate the next point of attachment:
//! RSSI location tracking, sequential-pattern data mining, and two
//! baselines (transition matrix and ignorant prediction). Predicted moves
//! feed a handoff delay model and a two-stage buffer reservation ledger.
//!
//! [`experiments`] ties everything together into reproducible accuracy,
//! delay and drop experiments that emit CSV reports.

pub mod error;
pub mod experiments;
pub mod handoff;
pub mod mobility;
pub mod prediction;
pub mod radio;
pub mod reservation;
pub mod topology;

pub use error::{PmmsError, Result};
pub use handoff::{DelayBreakdown, HandoffEvent, LoadClass};
pub use mobility::{MobilePath, PathHistory, PathStep};
pub use prediction::{MobilityRule, RankedPrediction, RuleSet, TransitionMatrix};
pub use radio::{RadioConfig, RssiSample, ThresholdEvent};
pub use reservation::{Reservation, ReservationLedger, TrafficType};
pub use topology::{ApId, GridTopology, Point, RegionId};

/// Discrete simulation time, in RSSI sampling intervals.
pub type Tick = u64;
