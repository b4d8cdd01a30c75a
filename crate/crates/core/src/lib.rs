//! Joint positioning and control of a quadrotor by factor graph optimization.
//!
//! A single nonlinear least-squares problem estimates the current state from
//! noisy positioning (and optionally relative-pose) measurements while
//! planning a receding-horizon control sequence.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dynamics;
pub mod error;
pub mod factors;
pub mod fgo;
pub mod harness;
pub mod so3;
pub mod trajgen;

pub use error::{JpcmError, Result};
