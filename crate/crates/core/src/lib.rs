//! Simulation of continuous-variable entity authentication with optical
//! physical unclonable keys.
//!
//! A key is a multiple-scattering medium modelled by complex-Gaussian
//! reflection coefficients. The verifier shapes a coherent probe with an SLM
//! mask optimized for the true key, measures one quadrature of the scattered
//! field by homodyne detection and checks whether the outcome falls in a bin
//! centred on the enrolled response. Over many sessions the hit frequency of
//! the true key converges to a public constant, while false keys and clones
//! fall short.

pub mod adversary;
pub mod cli;
pub mod error;
pub mod experiments;
mod float17;
pub mod homodyne;
pub mod protocol;
pub mod rng;
pub mod scattering;

pub use error::{Error, Result};
pub use homodyne::{HomodyneChannel, ProbeSet, ProbeState, Quadrature, Response};
pub use protocol::{CrpDatabase, CrpRecord, VerificationConfig, VerificationReport};
pub use rng::Streams;
pub use scattering::{CouplingProfile, PhaseMask, ScatteringKey};
