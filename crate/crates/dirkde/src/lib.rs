//! Kernel density estimation for directional and directional-linear data.
//!
//! Directional data live on the unit q-sphere `Ω_q ⊂ ℝ^{q+1}` (circle for
//! q = 1, sphere for q = 2); directional-linear data pair a direction with a
//! real value, so their support is the cylinder `Ω_q × ℝ` when q = 1. This
//! crate implements:
//!
//! * the directional and directional-linear kernel density estimators with
//!   von Mises (or custom rapidly-decaying) directional kernels and Gaussian
//!   (or custom symmetric) linear kernels ([`kde`]);
//! * exact MISE formulas for von Mises and von Mises-normal mixture targets,
//!   their asymptotic (AMISE) counterparts, AMISE-optimal bandwidths and
//!   closed-form smooth-bootstrap MISE ([`risk`]);
//! * a seeded Monte Carlo ISE oracle that validates every closed form at
//!   desk scale ([`risk::mc_ise_dir`] and friends);
//! * the supporting geometry and quadrature on `Ω_q` and `Ω_q × ℝ`
//!   ([`sphere`]), mixture models and samplers ([`models`]), kernel-derived
//!   constants ([`kernels`]) and log-scale special functions ([`special`]).
//!
//! Everything that touches a concentration parameter `κ = 1/h²` is computed
//! in log space so that small bandwidths do not overflow.

pub mod error;
pub mod kde;
pub mod kernels;
pub mod models;
pub mod risk;
pub mod special;
pub mod sphere;

pub use error::{Error, Result};
