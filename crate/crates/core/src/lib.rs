//! Structure-preserving integration of the stochastic nonlinear Schrödinger
//! lattice `dU = i(A U / h^2 + lambda F(U) U) dt + i Z(U) o dbeta` with
//! multiplicative Stratonovich noise.
//!
//! * [`lattice`]: grid, stencil, noise eigenstructure, initial data
//! * [`noise`]: per-path Brownian increments with coarse/fine coupling
//! * [`schemes`]: implicit midpoint plus Euler–Maruyama and implicit Euler
//! * [`geometry`]: tangent maps, wedge forms, Hörmander rank
//! * [`estimators`]: observables, time averages, weak errors, order fits
//! * [`harness`]: config files, experiment runner and CSV output

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod lattice;
pub mod noise;
pub mod parallel;
pub mod schemes;

pub use error::{Error, HarnessError, Result};
pub use lattice::{InitialCondition, LatticeConfig, NoiseOperators, State};
pub use noise::{Level, PathSpec};
pub use parallel::Execution;
pub use schemes::{Scheme, StepperConfig};
