//! Qubit chains: operator strings over `{I, Z, a, a†}`, charge grading, the
//! dense many-body flow, its Taylor series in `B`, and finite-size probes.

pub mod charge;
pub mod dense;
pub mod poly;
pub mod probe;
pub mod series;
pub mod symbol;

pub use charge::{charge_decompose, eigenoperator_check, linearized_solution, ChargeDecomposition};
pub use dense::{dense_flow, from_dense, to_dense, DenseFlowOptions, DenseTrajectory};
pub use poly::PauliPolynomial;
pub use probe::{convergence_probe, ProbeTable};
pub use series::{power_series_coefficients, power_series_terms};
pub use symbol::{charge_of_string, OpString, Symbol};
