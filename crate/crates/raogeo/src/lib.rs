//! # raogeo
//!
//! Numerics for the statistical geometry of parametric families:
//!
//! - [`families`] — built-in parametric families (Gaussian, Poisson, finite
//!   discrete), their densities, samplers, and coordinate charts;
//! - [`fisher`] — the Fisher information matrix by three equivalent
//!   definitions, plus its covariant transformation between charts;
//! - [`estimation`] — Cramér-Rao lower bounds and Monte Carlo
//!   estimator-efficiency experiments under the Löwner order;
//! - [`divergences`] — f-divergences (KL, Hellinger, Bhattacharyya,
//!   alpha-family), invariance and coarse-graining monotonicity machinery;
//! - [`expfam`] — canonical exponential families: cumulant functions,
//!   Legendre duality, Bregman divergences, and closed-form MLE;
//! - [`geodesics`] — Fisher-Rao geodesics and Rao distances (shooting ODE
//!   solver plus the hyperbolic closed form for Gaussians), dual e/m
//!   geodesics, and the generalized Pythagorean relation;
//! - [`cli`] — the `raogeo` command-line front end.
//!
//! The narrative guide lives in `book/`; its code snippets compile and run
//! as doc-tests of this crate.

pub mod cli;
pub mod divergences;
pub mod error;
pub mod estimation;
pub mod expfam;
pub mod families;
pub mod fisher;
pub mod geodesics;
pub mod numerics;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book;
