//! Towers of periodic orbits with halving central exponents in a
//! piecewise-affine model of a heterodimensional cycle, together with the
//! checks that the limit of their orbit measures is ergodic, has zero
//! central exponent and uncountable support.
//!
//! Modules, bottom up:
//!
//! * [`quotient`]: affine algebra of the central quotient dynamics and the
//!   scalar solvers and inequalities built on it.
//! * [`model`]: the cycle model, itinerary words and periodic orbits.
//! * [`tower`]: the inductive construction and its per-level certificates.
//! * [`measure`]: periodic measures, Birkhoff integrals and the ergodicity
//!   criterion.
//! * [`config`], [`report`], [`cli`]: configuration, report records and the
//!   command implementations behind the `hetero-cycle` binary.

// Range checks are written `!(x > lo)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dd;
pub mod measure;
pub mod model;
pub mod quotient;
pub mod report;
pub mod tower;
