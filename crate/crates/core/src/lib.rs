//! Radial solutions, admissibility thresholds, profile ODEs and sub/supersolution
//! barriers for exterior Dirichlet problems of Hessian quotient equations
//! `S_k(D^2 u) / S_l(D^2 u) = g`.

pub mod asymptotics;
pub mod barrier;
pub mod error;
pub mod numeric;
pub mod profiles;
pub mod radial;
pub mod scenario;
pub mod symmetric;

pub use error::{Error, Result};
