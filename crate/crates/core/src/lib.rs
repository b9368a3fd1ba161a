//! Magnetic geodesic flows on surfaces: integration, curvature, the
//! Riccati stability test, closed orbits on hyperbolic cylinders and an
//! exact Anosov magnetic system on a surface of revolution.

pub mod error;
pub mod builtin;
pub mod examples;
pub mod flow;
pub mod geom;
pub mod hyperbolic;
pub mod ode;
pub mod quadrature;
pub mod stability;

pub use error::{Error, Result};

/// Decimal representation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
