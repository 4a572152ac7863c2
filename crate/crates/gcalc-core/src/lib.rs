//! Numerical toolkit for sublinear expectations and G-Brownian motion.
//!
//! The crate builds the whole chain at desk scale:
//!
//! * finite-scenario sublinear (upper) expectations with exact axiom checks,
//! * a monotone finite-difference solver for the G-heat equation with an
//!   independent bang-bang lattice oracle,
//! * the G-normal distribution functional and its closed-form identities,
//! * G-expectation / conditional G-expectation of cylinder functionals of
//!   the canonical path via an accumulator dynamic program,
//! * pathwise Ito-type calculus (stochastic integrals, quadratic variation,
//!   Ito formula residuals) on simulated volatility-controlled scenarios,
//! * SDEs driven by G-Brownian motion via Euler steps and Picard iteration,
//! * the verification suites wiring all of the identities together.

pub mod error;
pub mod expectation;
pub mod gnormal;
pub mod heat;
pub mod lattice;
pub mod paths;
pub mod payoff;
pub mod quadrature;
pub mod report;
pub mod sde;
pub mod sublinear;
pub mod util;
pub mod verify;

pub use error::{GcalcError, Result};
pub use heat::GParams;
pub use payoff::Payoff;
