//! Fiberwise measure theory at desk scale.
//!
//! Everything here is indexed by a finite atomic probability base: a scalar
//! "random" quantity is one real per atom, a vector measure assigns such a
//! quantity to every cell of a finite partition, and all the classical
//! constructions (total variation, densities, conditional expectation,
//! functional duality, perimeter) become exact fiberwise computations that
//! can be cross-checked against brute-force enumeration.

pub mod conditional;
pub mod duality;
pub mod foundations;
pub mod instances;
pub mod io;
pub mod l0_measure;
pub mod module_integration;
pub mod oracles;
pub mod perimeter;
pub mod radon_nikodym;
pub mod selftest;

mod error;

pub use error::{RnmError, RnmResult};
