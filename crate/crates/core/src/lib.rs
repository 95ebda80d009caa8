//! Thermodynamic formalism for window-constrained sub-shifts of `{0, 2}^Z`
//! and the interval maps fibred over them.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod fiber;
pub mod kv;
pub mod mixing;
pub mod params;
pub mod schedule;
pub mod transfer;
pub mod transitions;
pub mod words;

pub use config::Config;
pub use error::{Error, Result};
pub use params::PotentialParams;
pub use words::{Triple, Word};
