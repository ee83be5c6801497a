//! Photon resource costs of GHZ-like states built from primate fusion and
//! bleeding on linear optics.
//!
//! The crate is split into:
//!
//! - [`fock`]: an exact sparse Fock-space simulator. It is the ground truth
//!   every closed form below is checked against.
//! - [`primate`]: elementary primate cost and pairwise fusion updates of
//!   `(n, λ, s, ν)`.
//! - [`bleeding`]: the bleeding unit, both its continuum closed forms and the
//!   exact finite-step sums.
//! - [`chains`]: star addition chains, the skeleton of every fusion sequence.
//! - [`optimizer`]: generation plans, their evaluation and the multi-start
//!   search for the cheapest plan.
//! - [`verify`]: oracle-vs-analytics batteries shared by the CLI and tests.
//!
//! The target state is
//!
//! ```text
//! |GHZ_N(s)> = sqrt(s) |10>^N + sqrt(1 - s) |01>^N
//! ```
//!
//! in dual-rail encoding.

#![forbid(unsafe_code)]

pub mod bleeding;
pub mod chains;
pub mod error;
pub mod fock;
pub mod optimizer;
pub mod primate;
pub mod verify;

pub use error::{Error, Result};
