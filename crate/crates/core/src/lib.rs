//! Numerical toolkit for two-weight inequalities of maximal Hilbert
//! transforms on the line.
//!
//! Measures are dyadic step densities plus atoms ([`measure`]); the
//! remaining modules build shifted dyadic grids, smooth truncations of the
//! Hilbert kernel and their suprema, Poisson-type functionals, the testing
//! constants, and Whitney / Calderón–Zygmund decompositions on top of them.

pub mod error;
pub mod measure;
pub mod operators;
pub mod poisson;
pub mod dyadic;
pub mod quadrature;
pub mod conditions;
pub mod decomp;
pub mod corpus;
pub mod checks;

pub use error::{Error, Result};
pub use measure::{Atom, Interval, Measure, Piece, StepAtomicMeasure, StepFunction, WeightPair};
