//! Numerical toolkit for DeGiorgi-type regularity estimates with Orlicz
//! gains: Young functions, Luxemburg norms, the adapted iteration and its
//! constants, weights, and a finite-difference solver for degenerate
//! divergence-form operators.

pub mod error;
pub mod grid;
pub mod iteration;
pub mod orlicz;
pub mod pde;
pub mod roots;
pub mod schedule;
pub mod weights;
pub mod young;

pub use error::{Error, Result};
