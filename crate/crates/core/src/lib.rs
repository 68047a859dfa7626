//! Hemodynamics toolkit for LVAD-supported aortic flow: a collocated
//! finite-volume Navier-Stokes solver with three-element Windkessel outlets,
//! a quadratic pump characteristic, hemodynamic indicators and a POD
//! reduced-order model with parameter-space interpolation.

pub mod error;
pub mod fv;
pub mod indicators;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod podi;
pub mod pump;
pub mod units;
pub mod windkessel;

pub use error::{Error, Result};
