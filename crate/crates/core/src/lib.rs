//! Joint active and passive precoding for wideband RIS-aided cell-free
//! downlink networks.
//!
//! Several multi-antenna base stations jointly serve multi-antenna users over
//! `P` subcarriers, helped by reconfigurable intelligent surfaces. The
//! [`optimizer`] alternates between the BS precoders and the RIS reflection
//! coefficients to maximize the weighted sum-rate, using fractional
//! programming transforms ([`fp`]) that reduce each block to a concave QCQP
//! handled by the [`solvers`].
//!
//! The [`experiment`] module drives Monte-Carlo sweeps over the user-cluster
//! distance and persists the results as CSV.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod fp;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod solvers;

pub use channel::{ChannelSet, Dimensions, PathLoss, Point, ScenarioConfig};
pub use error::{Error, Result};
pub use metrics::{PhaseConfig, PhaseMode, Precoder};
pub use optimizer::{OptimizationResult, OptimizerOptions};
