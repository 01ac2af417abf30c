//! Low-lying spectrum of the magnetic Neumann Laplacian `(i∇ + BA)²` on smooth
//! planar domains with variable magnetic field, together with the closed-form
//! semiclassical predictions it is checked against.

pub mod agmon;
pub mod asymptotics;
pub mod critical_field;
pub mod eigensolve;
pub mod error;
pub mod field;
pub mod geometry;
pub mod halfline;
pub mod quasimode;
pub mod sparse;
pub mod strip;
pub mod sweep_fit;

pub use error::{Error, Result};
