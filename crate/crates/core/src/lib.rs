//! Flatness-based control of a grid-following LCL inverter on a weak grid.
//!
//! The crate models the DC-link/LCL plant in complex (αβ) coordinates, builds
//! smooth set-point trajectories, computes the linearising modulation index
//! from a fourth-order flat output, and integrates the closed loop with a
//! fixed-step RK4 engine. A small CLI wraps run, tune, verify and sweep.

// Negated float comparisons are used on purpose so that NaN fails checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod controller;
pub mod frames;
pub mod ode;
pub mod plant;
pub mod record;
pub mod sim;
pub mod summary;
pub mod sweep;
pub mod trajectory;
pub mod tuning;
