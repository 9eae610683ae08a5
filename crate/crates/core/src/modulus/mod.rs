//! p-modulus of curve families with primal-dual certificates.
//!
//! [`solve_modulus`] alternates a log-barrier Newton solve over the curves
//! found so far with a violation oracle over the whole family: a scan for
//! explicit families, shortest paths under the weights `rho * len` for
//! connecting families and a dynamic program for monotone ones.

mod brute;
mod duality;
mod nnls;
mod oracle;
mod program;
mod solve;

pub use brute::{brute_force_modulus, BRUTE_FORCE_MAX_EDGES};
pub use duality::{verify_duality, DualityReport};
pub use oracle::FamilySpec;
pub use solve::{eta_measure, is_admissible, solve_modulus, Admissibility, DualCurve, ModulusCertificate, SolveOptions};
