//! Effective capacity of a device-to-device (D2D) link whose transmitter picks
//! between the direct link and a two-hop cellular relay through the eNodeB by
//! comparing noisy pathloss measurements.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] places the eNB and the three user equipments in a cell and
//!   turns distances into pathlosses.
//! * [`mode_selection`] is the binary hypothesis test on the pathloss gap,
//!   with its error probabilities and per-slot decision marginals.
//! * [`link_model`] gives the mean SNRs, rate thresholds and ON probabilities
//!   for the noise-limited overlay and interference-limited underlay cases.
//! * [`effective_capacity`] assembles the four-state Markov service process,
//!   the closed-form effective capacity, a power-iteration cross-check and the
//!   optimal fixed-rate search.
//! * [`monte_carlo`] is an independent slot-level simulator used as an oracle
//!   for everything above.
//! * [`experiment`] handles configuration files, parameter sweeps and CSV/JSON
//!   output.
//!
//! ```
//! use d2d_ec::prelude::*;
//!
//! let scenario = Scenario::build(&Placement::default_explicit(), 700.0).unwrap();
//! let radio = RadioParams::default();
//! let ms = ModeSelectParams::from_sigma_t(Priors::equal(), scenario.pathloss_gap_db(), 2.0).unwrap();
//! let qos = QosParams::new(1e-3, 25.0, radio.slot_len).unwrap();
//! let ec = analytic_ec(&scenario, &radio, &ms, ScenarioKind::Overlay, ThresholdRule::Consistent, &qos).unwrap();
//! assert!(ec.ec > 0.0 && ec.ec <= 25.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting guards

pub mod effective_capacity;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod link_model;
pub mod mode_selection;
pub mod monte_carlo;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::effective_capacity::{
        analytic_ec, ec_theta_limits, effective_capacity, optimal_rate_search,
        spectral_radius_oracle, transition_probs, EcResult, QosParams, RateGrid, RateSearch,
        TransitionProbs,
    };
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{NodePosition, Pathloss, Placement, Scenario};
    pub use crate::link_model::{OnProbs, RadioParams, ScenarioKind, ThresholdRule};
    pub use crate::mode_selection::{
        DecisionMarginals, Mode, ModeSelectDiagnostics, ModeSelectParams, Priors,
    };
    pub use crate::monte_carlo::{SimConfig, SimEstimate};
}
