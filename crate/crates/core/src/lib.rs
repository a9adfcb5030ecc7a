//! Exact computation of logarithmic Higgs-de Rham flows on the marked
//! projective line and on totally degenerate nodal curves over small finite
//! fields.

pub mod bundles;
pub mod cartier;
pub mod error;
pub mod exactalg;
pub mod logcurve;
pub mod nodal;
pub mod periodicity;
pub mod suite;

pub use error::{Error, Result};
