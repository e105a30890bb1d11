//! Inverse curvature flows `ẋ = F⁻ᵖν` of starshaped hypersurfaces in
//! hyperbolic space, written as radial graphs over the round sphere, with
//! diagnostics for the barrier, oscillation, gradient and decay estimates
//! such flows obey.
//!
//! Layout:
//! - [`sphere`]: grids on `Sⁿ` and covariant derivatives
//! - [`hypersurface`]: tilt factor, shape operator, principal curvatures, cones
//! - [`curvature`]: curvature functions `F` and the speed `F⁻ᵖ`
//! - [`barrier`]: spherical solutions `Θ(t, r₀)`
//! - [`flow`]: RK4 time integration of `u̇ = v·F⁻ᵖ`
//! - [`diagnostics`]: monitored quantities and decay fits
//! - [`config`], [`runner`]: run configuration and on-disk artifacts
//! - [`acceptance`]: the numerical verification suite behind `hicf verify`

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod barrier;
pub mod config;
pub mod curvature;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod flow;
pub mod hypersurface;
pub mod oracle;
pub mod runner;
pub mod sphere;

pub use error::{Error, Result};
pub use exec::Exec;
