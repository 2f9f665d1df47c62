//! Simulation laboratory for the Arratia flow with drift.
//!
//! The crate builds drift-perturbed coalescing Brownian motions in two
//! independent ways and checks them against closed-form ground truth:
//!
//! * [`web`]: N-point coalescing Brownian motions with staggered space-time
//!   births (the drift-free engine).
//! * [`splitting`]: the fractional-step construction, alternating coalescing
//!   evolution on partition intervals with the drift ODE flow at partition
//!   points, with jump and martingale-part bookkeeping.
//! * [`direct`]: Euler–Maruyama coalescing diffusions with drift, meeting-time
//!   experiments, cluster-size estimators and the comparison sandwich.
//! * [`oracles`]: quadrature and closed forms (meeting laws, the coalescence
//!   defect `l(t, u)`, cluster-size expectations, the normal CDF).
//! * [`estimators`]: mergeable moments, Kolmogorov–Smirnov with an atom at
//!   infinity, Brownian-motion diagnostics and the correlation-decay
//!   experiment.
//! * [`cli`]: the `coalflow` command-line front end.
//!
//! Every random draw comes from a labelled counter-based stream
//! ([`model::RngSpec`]), so replica results do not depend on thread count.

// `!(x > 0.0)`-style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod direct;
pub mod error;
pub mod estimators;
pub mod model;
pub mod oracles;
pub mod parallel;
pub mod splitting;
pub mod web;

pub use error::{Error, Result};
pub use model::{DriftModel, Partition, Purpose, RngSpec, RunManifest, StreamLabel};

/// Header line written at the top of every CSV file.
pub const CSV_SCHEMA_HEADER: &str = "# coalflow-schema v1";

/// Version string embedded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
