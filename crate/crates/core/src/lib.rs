//! Certified reach-avoid trajectory synthesis for quadrotors.
//!
//! The crate is `no_std` (with `alloc`) and purely computational:
//!
//! * [`so3`] – small fixed-size linear algebra, the hat/vee maps, Rodrigues and
//!   a Jacobi eigensolver for symmetric matrices up to 6×6.
//! * [`bounds`] – Lyapunov matrices, stability constants and the uniform
//!   tracking-error bounds of the geometric controller.
//! * [`controller`] – tracking errors, desired attitude and rates, thrust and
//!   torque laws.
//! * [`dynamics`] – rigid-body model, adaptive Dormand–Prince integration of
//!   the closed loop and trace certification.
//! * [`geometry`], [`tube`] – hyper-rectangle algebra and the safe-box RRT that
//!   produces a tube of boxes.
//! * [`bezier`], [`lp`], [`synth`] – piecewise Bézier curves, a dense
//!   bounded-variable simplex and the iterative time-scaling synthesis.
//! * [`tuner`] – simulated annealing over gains.
//! * [`initial_set`] – initial-set membership sampling.
//!
//! File formats, the command line and parallel batch runs live in the
//! `reachcert` crate.

#![no_std]
// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bezier;
pub mod bounds;
pub mod controller;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod initial_set;
pub mod lp;
pub mod rng;
pub mod so3;
pub mod synth;
pub mod tube;
pub mod tuner;

pub use error::{Error, Result};
pub use so3::{Mat3, Matrix, Rot3, SymMat, Vec3};
