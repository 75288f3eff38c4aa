//! Analysis-by-synthesis (AbS) scalar quantization of compressed-sensing
//! measurements.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`] draws K-sparse sources and Gaussian sensing matrices and
//!   computes NMSE.
//! * [`reconstruction`] holds the pluggable reconstruction contract with OMP
//!   and an exhaustive best-subset oracle.
//! * [`quantization`] trains Lloyd codebooks, splits the bit budget and does
//!   nearest-neighbor encoding.
//! * [`abs`] is the closed-loop encoder: a coordinate sweep over codebook
//!   indexes scored by reconstructing every candidate.
//! * [`baselines`] implements support-set coding.
//! * [`harness`] runs seeded Monte-Carlo sweeps and writes CSV/SVG.
//!
//! Trial-level work is data parallel through rayon when the `parallel`
//! feature (on by default) is enabled; without it every loop runs
//! sequentially and produces bit-identical output.

pub mod abs;
pub mod baselines;
mod error;
pub mod harness;
pub mod linalg;
pub mod par;
pub mod quantization;
pub mod reconstruction;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};
