//! Simulation and spectral analysis of a three-layer active constrained layer (ACL) beam:
//! two piezoelectric face layers bonded to a compliant shear core, clamped at `x = 0` and
//! controlled by boundary feedback at `x = L`.
//!
//! Three closed-loop models are available:
//!
//! * [`Model::Magnetic`]: the charge of each piezoelectric layer is a dynamic field with
//!   magnetic inertia; feedback acts on the electrode currents and the bending end.
//! * [`Model::Electrostatic`]: charges eliminated; longitudinal and bending motion couple
//!   through the core shear angle; feedback on all tip velocities.
//! * [`Model::Decoupled`]: the electrostatic model with the shear coupling removed.
//!
//! The modules follow the workflow: [`params`] (inputs and derived constants), [`fem`]
//! (assembly), [`dynamics`] (time stepping and energy), [`spectral`] (generator spectra and
//! analytic resonant modes), [`analysis`] (decay fits, scans, comparisons) and [`cli`].

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod params;
pub mod spectral;

pub use error::{AclError, Result};
pub use fem::{Mesh, SystemMatrices};
pub use params::{BeamConfig, FeedbackGains, LayerParams, Model};
