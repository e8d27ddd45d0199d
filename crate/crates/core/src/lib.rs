//! Channel sensing with a holographic interference surface.
//!
//! A planar array records only the intensity of the incoming field mixed
//! with a known reference. [`holography`] recovers the complex field from
//! three phase-shifted recordings, [`pmcs`] splits it into per-user channels
//! with an extended Prony estimator ([`prony`]) run on one row and one
//! column of the array, and [`analysis`] checks the estimator's error bounds.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod holography;
pub mod patterns;
pub mod pmcs;
pub mod prony;
pub mod seed;

pub use channel::{Field, PathParams, SubcarrierGrid, UpaGeometry, UserScenario};
pub use error::{Error, Result};
pub use experiments::{Pipeline, Recovery, ToScenario, UserSpec};
pub use holography::{HologramSet, NoiseModel, ReferenceWave};
pub use patterns::{AngularGrid, PatternResult, Peak};
pub use pmcs::{PmcsConfig, PmcsResult};
pub use prony::{PronyConfig, PronyEstimate, Solver};
