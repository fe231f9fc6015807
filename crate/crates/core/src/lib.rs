//! Numerical laboratory for the double bracket flow `∂_B H = [[V,H],H]`.
//!
//! * [`lattice`], [`matrix`], [`locality`]: chains, coupling matrices and
//!   the locality pseudonorm `‖m‖_r` with a certified lower/upper bracket.
//! * [`fermion`]: the single-particle flow `∂_B h = 4[[v,h],h]`, its
//!   invariants, the exponential light-cone bound, and imaginary-time
//!   series terms.
//! * [`dimer`]: the dimerized chain, its 2×2 momentum blocks and the
//!   growth of its real-space length scale.
//! * [`spin`]: operator strings over `{I, Z, a, a†}`, charge grading, dense
//!   many-qubit flows, power series and finite-size probes.
//! * [`series`]: closed forms and recursions of the divergence models, with
//!   ratio-test radius estimates.

pub mod dimer;
pub mod error;
pub mod fermion;
pub mod lattice;
pub mod locality;
pub mod matrix;
pub mod ode;
pub mod output;
pub mod random;
pub mod series;
pub mod spin;

pub use error::{Error, Result};
pub use lattice::{build_chain, Geometry, Lattice};
pub use locality::{coupling_range, locality_lower, locality_profile, locality_upper, LocalityProfile};
pub use matrix::{double_bracket_rhs, operator_norm, spectrum, CouplingMatrix, Symmetry};
pub use ode::{IntegrationError, IntegratorConfig, IntegratorStats, Method};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
