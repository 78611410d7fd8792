//! Finite-instance machinery for partial translation structures, atlases,
//! positive-type kernels and Property A certificates.
//!
//! Everything operates on [`mspace::FiniteMetricSpace`]. On a finite space the
//! uniform Roe algebra is the full matrix algebra, so operators and kernels
//! share the single [`roe::Kernel`] type and no completion is modelled.

pub mod constructions;
pub mod error;
pub mod group;
pub mod mspace;
pub mod propa;
pub mod ptrans;
pub mod roe;
pub mod samples;

pub use error::{Error, Result};
pub use mspace::{FiniteMetricSpace, Point};
