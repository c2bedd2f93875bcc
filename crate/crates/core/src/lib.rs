//! Max-min downlink throughput for UAV base stations with multi-hop wireless
//! backhaul.
//!
//! UAVs hover at a common altitude, serve ground users over orthogonal
//! access links and relay traffic among themselves from a ground gateway.
//! The optimizers jointly choose UAV positions and the bandwidth and power
//! of every link to maximize the smallest per-user throughput while each
//! UAV forwards no more than it receives.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, JSON and the
//! command-line front end live in the `skyhaul` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod convex;
pub mod error;
mod linalg;
mod math;
pub mod oracle;
pub mod radio;
pub mod scenario;
pub mod scp;
pub mod surrogates;

pub use error::{Error, Result};
pub use radio::{
    access_gain, backhaul_gain, check_feasibility, evaluate, gateway_gain, link_rate, Allocation,
    ConstraintId, FeasibilityVerdict, RateReport, Violation, TOL_FEAS,
};
pub use scenario::{
    build_default_radio, dbm_to_watts, default_placement, watts_to_dbm, GroundNode, Placement,
    PlacementMode, RadioConstants, Scenario,
};
pub use oracle::{brute_force_oracle, OracleResult};
pub use scp::{
    association_report, benchmark_placement_only, benchmark_resource_only, optimize_alternating,
    optimize_placement, optimize_resources, run_scheme, Algorithm, Association, Iterate,
    PlacementOutcome, ResourceOutcome, RunStatus, Scheme, ScpConfig, Solution, TraceEntry,
};
