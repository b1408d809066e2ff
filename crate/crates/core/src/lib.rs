//! State-space dynamic substructuring.
//!
//! Builds displacement state-space models from modal parameters, enforces
//! Newton's second law through residual compensation modes, couples and
//! decouples models by Lagrange multipliers, turns unstable coupled models
//! into stable ones, and simulates them in the time domain.
//!
//! All angular frequencies are in rad/s.

pub mod analysis;
pub mod bench;
pub mod coupling;
pub mod error;
pub mod frf;
pub mod io;
pub mod linalg;
pub mod modal;
pub mod stabilize;
pub mod timesim;
pub mod types;

pub use error::{Error, Result};
pub use frf::{frf_reweight, FrfSet};
pub use types::{
    CMat, Domain, InterfaceMap, InterfacePair, ModalModel, PoleClass, PoleDescriptor, RMat, RcmConfig, Representation,
    StateSpaceModel,
};
