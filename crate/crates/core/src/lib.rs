//! Possibilistic Bernoulli filter for joint detection and tracking of a
//! single target.
//!
//! The crate implements the Bernoulli filter in the framework of possibility
//! theory: target existence is a pair of possibilities `(q⁰, q¹)` for
//! absence/presence with `max(q⁰, q¹) = 1`, the spatial state is a
//! possibility function represented by weighted particles whose maximum
//! weight is 1, and all combination rules use `max`/`sup` in place of
//! sums and integrals. Detection profiles are specified as intervals of
//! probability via a pair `(d⁰, d¹)`, which lets the filter run under
//! partial knowledge of the true detection probability.
//!
//! Modules:
//! - [`possibility`]: Gaussian and discrete possibility functions plus
//!   density transforms,
//! - [`smc`]: particle representation and sequential Monte Carlo steps,
//! - [`bernoulli`]: existence/spatial prediction and multi-sensor update,
//! - [`scenario`]: multistatic Doppler-only simulation scenario,
//! - [`eval`]: OSPA error, trial driver and Monte Carlo aggregation,
//! - [`config`]: JSON-backed scenario configuration.

pub mod bernoulli;
pub mod config;
pub mod error;
pub mod eval;
pub mod possibility;
pub mod scenario;
pub mod smc;

pub use bernoulli::{
    BernoulliState, BirthModel, ClutterModel, DetectionPossibility, ExistenceTpm,
    MeasurementPossibility, SensorChannel,
};
pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use eval::{McReport, OspaParams, TrialRecord};
pub use possibility::{DiscretePossibility, GaussianPossibility};
pub use scenario::{Geometry, RadarParams, ScanSet, SensorParams, TargetState};
pub use smc::{GaussianTransition, ParticleSet, RngStream, SmcControls, SupMode};
