//! Decoherence as a high-dimensional geometric phenomenon.
//!
//! Environment branch states `|E_i⟩` are modelled as points of the complex
//! unit sphere `𝕊^n ⊂ ℂ^n`. The crate samples such states, measures the
//! max-overlap statistic `η = max_{i≠j} |⟨E_i|E_j⟩|`, evaluates the closed-form
//! bounds and limits for its law, and checks the exact identities that tie
//! `η` to the classicality of the reduced system state and to its entropy.
//!
//! Modules:
//!
//! - [`sphere`]: uniform states, Haar unitaries, spherical caps, Brownian diffusion.
//! - [`eta`]: the `η_{n,d}` statistic, its bounds, `d_max` and the interference fraction.
//! - [`quantum`]: reduced density matrices, classicality gap, linear and von Neumann entropy.
//! - [`interaction`]: a discretized interacting-particle environment.
//! - [`experiments`]: reproducible sweeps writing CSV with seed provenance.
//! - [`rng`] and [`stats`]: deterministic substreams and goodness-of-fit helpers.

#![forbid(unsafe_code)]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eta;
pub mod experiments;
pub mod interaction;
pub mod quantum;
pub mod rng;
pub mod sphere;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
