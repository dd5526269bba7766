//! Adaptive finite elements for Darcy-Forchheimer flow coupled with a
//! convection-diffusion-reaction equation.
//!
//! The flow uses the MINI element (P1 + bubble velocity, P1 pressure), the
//! concentration continuous P1. A damped Picard iteration linearises the
//! Forchheimer term, five residual-type indicators split the error into a
//! linearisation and a discretisation part, and an estimate-mark-refine
//! loop drives newest-vertex bisection.

pub mod adapt;
pub mod assembly;
pub mod basis;
pub mod dofmap;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod linsolve;
pub mod mesh;
pub mod output;
pub mod picard;
pub mod problem;
pub mod quadrature;
pub mod state;
pub mod verification;

pub use error::{Error, Result};
