//! Numerical laboratory for min-max (Isaacs-type) second-order PDEs on
//! periodic domains.
//!
//! The crate provides, on the unit torus:
//!
//! - declarative min-max operators with finite control sets and closed-form
//!   coefficients ([`operator`]);
//! - monotone finite-difference schemes with upwind drift and sign-split
//!   cross-derivative stencils, CFL bookkeeping and discrete seminorm
//!   estimators ([`scheme`]);
//! - explicit time stepping for the Cauchy problem with a-priori bound and
//!   time-Lipschitz checks ([`parabolic`]);
//! - the discounted approximation of the ergodic problem with two
//!   independent estimators of the ergodic constant ([`ergodic`]);
//! - evaluation of explicit continuous dependence bounds for both the
//!   parabolic and ergodic settings, and paired experiments rendering
//!   verdicts ([`dependence`]);
//! - cell problems, effective Hamiltonians and two-scale singular
//!   perturbation studies ([`homog`]);
//! - a declarative experiment configuration with a thin CLI ([`config`],
//!   [`cli`]).
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability and `README.md` for the configuration format.

pub mod cli;
pub mod config;
pub mod dependence;
pub mod ergodic;
pub mod error;
pub mod expr;
pub mod grid;
pub mod homog;
pub mod operator;
pub mod parabolic;
pub mod scheme;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction};
pub use operator::{
    CoefficientDistance, ControlSet, HjbiOperator, Modulus, RegularityCertificate, SampleSpec,
};
