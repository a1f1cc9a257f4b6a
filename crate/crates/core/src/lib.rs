//! Numerical kernels for the Candelas–de la Ossa metrics on the resolved and
//! deformed conifolds, the cutoff functions used to glue them into compact
//! Calabi–Yau threefolds, and the exterior algebra needed to certify
//! positivity of the resulting (2,2)-forms.
//!
//! Module overview:
//!
//! * [`radial`]: radial Kähler potentials `f(r²)` for the cone, resolved and
//!   deformed conifolds, with derivatives up to fourth order.
//! * [`cutoff`]: the piecewise cutoff `χ` and the smooth step functions `σ`, `ρ`.
//! * [`frame`]: forms on a three-dimensional complex coframe, `(2,2)`-form
//!   coordinates and the square root of a positive `(2,2)`-form.
//! * [`resolved`]: the resolved-conifold coframe, the balanced-class
//!   correction form and the positivity search.
//! * [`deformed`]: the deformed-conifold chart, partial derivatives of `r²`,
//!   the metric and its curvature.
//! * [`numerics`]: Taylor jets, adaptive quadrature, finite differences and
//!   root finding used throughout.

pub mod cutoff;
pub mod deformed;
mod error;
pub mod frame;
pub mod numerics;
pub mod radial;
pub mod resolved;

pub use error::{Error, Result};
