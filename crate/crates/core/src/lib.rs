//! Simulation of Zeno-effect optimisation on three-level units.
//!
//! Each unit has two computational levels plus an undefined level `u`.
//! Sweeping an angle from 0 to pi/2 rotates a per-unit forbidden state from
//! the `|+>` direction onto `|u>`. Decay, measurement or an energy penalty on
//! that forbidden state, together with clause or cardinality constraints,
//! steers the register from `|uu..u>` towards a constrained optimum.
//!
//! Modules are layered bottom-up:
//! [`hilbert`] → [`states`] → [`operators`] / [`constraints`] → [`evolution`]
//! → [`analysis`] → [`experiments`].

pub mod analysis;
pub mod constraints;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod hilbert;
pub mod operators;
pub mod states;

pub use error::{Error, Result};
