//! Numerical toolkit for approximate quantum error correction.
//!
//! The crate decides and quantifies how well a noisy channel can be
//! reversed: it evaluates worst-case entanglement fidelities between
//! channels, checks exact and perturbed Knill-Laflamme conditions,
//! computes the complementary-channel estimate of the optimal recovery
//! error, and constructs near-optimal recovery channels carrying a
//! built-in performance guarantee.

pub mod channel;
pub mod correctability;
pub mod error;
pub mod fidelity;
pub mod io;
pub mod matops;
pub mod oracles;
pub mod recovery;

pub use error::AqecError;
pub use matops::{CMat, CVec, DensityMatrix};
