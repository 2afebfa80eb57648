//! Weak-probe spectra of electromagnetically induced absorption (EIA) in a
//! four-level N system with thermal motion, buffer-gas collisions,
//! pump-probe wave-vector mismatch, spatial-frequency filtering and
//! finite-beam Ramsey narrowing.

pub mod config;
pub mod error;
pub mod faddeeva;
pub mod filter;
pub mod lineshape;
pub mod model;
pub mod quadrature;
pub mod ramsey;
pub mod runner;
pub mod spectrum;
pub mod velocity;

pub use error::{EiaError, Result};
pub use num_complex::Complex64 as C64;
