//! Parallel Analysis for choosing the number of factors or principal
//! components, together with the simulators, closed-form references and Monte
//! Carlo verifiers used to study it.
//!
//! The selection procedure lives in [`select`]; [`permute`] and [`spectra`]
//! provide the permutation and singular-value machinery it is built on.

pub mod error;
pub mod harness;
pub mod moments;
pub mod oracles;
pub mod permute;
pub mod seed;
pub mod select;
pub mod simulate;
pub mod spectra;

pub use error::{PaError, Result};
pub use permute::PermutationArray;
pub use select::{pa_select, PaConfig, SelectionResult};
pub use spectra::{operator_norm, singular_values, SingularSpectrum};
