// SPDX-License-Identifier: Apache-2.0

//! Distributed AC optimal power flow on a star network.
//!
//! Every bus owns a small set of nodal variables (linear projections of the
//! network voltage) and solves a lifted semidefinite subproblem; a center
//! reconciles the proposals with a weighted least-squares update.
//!
//! The crate is `no_std` with `alloc`. File formats, threads and the command
//! line live in the `drohs` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so NaN fails the check; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

extern crate alloc;

pub mod admittance;
pub mod case;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod matpower;
pub mod nodal;
pub mod sdp;
pub mod tensor;

pub use admittance::AdmittanceModel;
pub use case::{Branch, Bus, BusType, Cost, Gen, NetworkCase};
pub use engine::{EngineConfig, RunResult, RunStatus, Start};
pub use error::{Error, Result};
pub use tensor::StarModel;

pub use num_complex::Complex64;
