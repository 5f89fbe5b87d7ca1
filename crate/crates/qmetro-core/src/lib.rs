//! Core library for quantum field estimation: sensitivity bounds, classical
//! Fisher analysis of measurement schemes, feedback/multi-round protocol
//! enumeration, ancilla-assisted circuits, and reproducible sampling.
//!
//! The crate is `no_std` + `alloc`; all I/O, file formats, and parallel
//! dispatch live in the companion CLI crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod ancilla;
pub mod control;
pub mod eig;
pub mod error;
pub mod fisher;
pub mod mat;
pub mod math;
pub mod mc;
pub mod povm;
pub mod protocol;
pub mod scan;
pub mod state;
pub mod subspace;
pub mod synth;

pub use error::Error;
pub use mat::ComplexMatrix;

/// Convenience result alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;
