//! Numerical toolkit for the Fourier uncertainty principle characterizing
//! polynomial-times-gaussian functions.
//!
//! The modules follow the objects the principle is built from:
//!
//! - [`specfun`]: complex log-Gamma, gaussian moments, Hermite polynomials, erf.
//! - [`funcmodel`]: the class of finite sums `p(x) e^{-a x²/2}`, their Fourier
//!   transforms, parity split, exponential moments and the autocorrelation
//!   `F(λ) = (2π)^{-1/2} ∫ f(x) f(λx) dx` with its partial-fraction form.
//! - [`quad`]: adaptive integration on the line and on the first quadrant.
//! - [`beurling`]: the coupled integral `∬ |f(x) f̂(y)| e^{λ|xy|}` and its
//!   blow-up exponent as `λ → 1-`.
//! - [`mellin`]: Mellin transforms, the normalized `Θ` functions and the
//!   product identities between them.
//! - [`recover`]: recovery of the width and polynomial from samples.
//! - [`cli`]: the batch front end.

pub mod beurling;
pub mod cli;
pub mod error;
pub mod funcmodel;
pub mod mellin;
mod lsq;
mod poly;
pub mod quad;
pub mod recover;
pub mod specfun;

pub use error::{Error, Result};
pub use funcmodel::{GaussPoly, GaussPolyTerm, PartialFractionF};

pub use quad::{QuadOutcome, QuadResult};
