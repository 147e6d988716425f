//! A small laboratory for studying stochastic gradient descent on non-convex
//! smooth objectives.
//!
//! The crate is organised around five pieces:
//!
//! - [`objective`]: smooth objectives with exact gradients, a declared
//!   smoothness constant and a catalog of critical-set components. Ships a
//!   one-dimensional piecewise benchmark (`cosine_staircase`) whose critical
//!   points cover a saddle, a plateau of global minimizers, a local maximizer
//!   and a local minimizer.
//! - [`noise`]: stochastic gradient oracles. Each oracle declares the
//!   deterministic sequences `(a_k, b_k, c_k)` bounding its conditional second
//!   moment, and comes with Monte-Carlo validators for unbiasedness and the
//!   second-moment bound.
//! - [`schedule`]: the stepsize sequence bundled with a bound channel, plus
//!   mechanical checkers for the summability, positivity and monotone-ratio
//!   conditions that the convergence theory requires.
//! - [`engine`]: the SGD recursion `x_{k+1} = x_k - alpha_k g_k` run for one
//!   seed or an ensemble of seeds, with deterministic counter-based
//!   randomness and decimated trajectory records.
//! - [`diagnostics`]: limit-point classification, Monte-Carlo conditional
//!   expectation probes for the per-iteration descent event, and local
//!   Lojasiewicz exponent estimation.
//!
//! Determinism is a hard contract everywhere: a `(seed, config, oracle,
//! schedule)` tuple fully determines a trajectory bit-for-bit, regardless of
//! how many worker threads run the ensemble.

pub mod diagnostics;
pub mod engine;
mod error;
pub mod noise;
pub mod objective;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
