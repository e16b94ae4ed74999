//! Achievable symmetric (max-min fair) rates for a two-user device-relaying
//! cellular network.
//!
//! Two operation modes are covered:
//!
//! * [`sim`]: simultaneous uplink/downlink, a TDMA combination of two
//!   two-way phases (user *i* ↔ base station) and one compute-forward
//!   two-way relaying phase through the stronger user.
//! * [`sep`]: separated uplink/downlink, a cooperative multiple-access phase
//!   followed by a cooperative broadcast phase, plus the no-cooperation
//!   baseline.
//!
//! All rates are in bits per channel use; powers and gains are linear and
//! noise-normalized (unit noise variance).

pub mod error;
pub mod model;
pub mod optimizer;
pub mod sep;
pub mod sim;

pub use error::{Error, Result};
pub use model::{capacity, capacity_plus, validate_config, Gains, NetworkConfig};
pub use optimizer::{refine_grid_max, Coordinate, SearchDomain, SearchProfile, SearchResult};
pub use sim::{
    harmonic_two_way_rate, optimize_sim, optimize_sim_two_way, sim_components, sim_rate_at,
    SimRateComponents, TimeShare,
};
pub use sep::{
    baseline_no_cooperation, bc_c_optimize, bc_c_rate_at, mac_c_optimize, mac_c_rate_at,
    optimize_sep, sep_rate_at, sep_solution_at, BcPowerSplit, CfExponent, DownlinkBudget,
    MacPowerSplit, SepOuterPoint, SepSolution,
};
