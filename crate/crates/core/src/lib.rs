//! Massless-boundary component mode synthesis for elastodynamic contact.
//!
//! This crate reduces finite-element structural models to compact
//! reduced-order models whose contact-boundary degrees of freedom carry no
//! inertia, and time-integrates frictionless and frictional unilateral
//! contact problems on those models. The main building blocks:
//!
//! * [`model`] — full-order second-order models (1D bar, structured
//!   hexahedral meshes, imported matrices, loads, modal damping).
//! * [`cms`] — component mode synthesis: MacNeal, Rubin, Craig-Bampton and
//!   the massless Craig-Bampton variant, plus the gap-coordinate transform.
//! * [`contact`] — contact laws, cone projections, Delassus systems and the
//!   projected-Jacobi augmented-Lagrangian inclusion solver.
//! * [`stepping`] — leapfrog time integration for massless-boundary models
//!   and a symmetric Moreau integrator for mass-carrying references.
//! * [`hbm`] — harmonic balance with an alternating frequency-time scheme
//!   and a Dynamic Lagrangian treatment of unilateral contact.
//! * [`scenarios`] — benchmark scenario builders, energy decomposition and
//!   error metrics.
//! * [`mmio`] — Matrix Market import/export with a JSON sidecar.

pub mod cms;
pub mod contact;
pub mod error;
pub mod hbm;
pub mod linalg;
pub mod mmio;
pub mod model;
pub mod scenarios;
pub mod stepping;

pub use error::{Error, Result};
pub use model::{LoadSet, LoadTerm, MeshSpec, SecondOrderModel};
