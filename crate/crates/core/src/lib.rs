//! Energy-efficiency-maximizing precoding for downlink massive MIMO LEO
//! satellite links.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: scenario configuration, UPA channel, link budget, noise and
//!   transmitter power consumption.
//! - [`metrics`]: SINR, the closed-form ergodic-rate upper bound, a Monte
//!   Carlo rate estimator and energy efficiency.
//! - [`digital`]: the fully digital precoder (Dinkelbach outer loop around a
//!   WMMSE block-coordinate solver).
//! - [`feasible`]: phase-shifter feasible sets, hull projections and rounding.
//! - [`hybrid`]: factorization of a digital precoder into analog and digital
//!   parts (AIM-ADP, AVPIM-ADP and a nearest-point-projection baseline).
//! - [`harness`]: seeded experiment sweeps and CSV/JSON result emission.

pub mod digital;
pub mod error;
pub mod feasible;
pub mod harness;
pub mod hybrid;
pub mod linalg;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
