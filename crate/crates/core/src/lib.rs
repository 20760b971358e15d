//! Density evolution and threshold analysis for multi-dimensional
//! spatially-coupled LDPC ensembles on the binary erasure channel.
//!
//! Sections live on the discrete torus `Z_L^D` ([`torus`]). Each bit section
//! couples to the check sections in a uniform `w^D` box ([`ensemble`]), a
//! shortening domain seeds decoding, and [`de`] runs the per-section
//! erasure-probability recursion. [`threshold`] bisects for BP thresholds and
//! [`experiments`] bundles the burst-erasure and rate studies.

pub mod config;
pub mod de;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod export;
pub mod threshold;
pub mod torus;

pub use de::{
    bit_update, check_update, de_step, decoding_erasure_probability, init_state, run_de, DeOutcome,
    DeState, ErasurePattern, Evolver, Termination, Trace, Verdict,
};
pub use ensemble::{
    closed_form_rate_1d, design_rate, domain_size, hypercube_rate_bound, CouplingWindow,
    EnsembleParams, ShorteningDomain,
};
pub use error::{Error, Result};
pub use threshold::{
    coupled_bp_threshold, scalar_de_fixed_point, single_burst_bound, uncoupled_bp_threshold,
    BisectionSpec, BurstBound, ThresholdResult,
};
pub use torus::{box_window_sum, wrap, Direction, GridShape, ScalarField, TorusIndex};
