//! Simulation laboratory for quasistatic quantum annealing.
//!
//! Energies are frequencies in GHz (`h = 1`), times are in nanoseconds, and the
//! angular factor `2π` appears only inside evolution operators and bath rates.

pub mod bench;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod freezeout;
pub mod interp;
pub mod ising;
pub mod rng;
pub mod schedule;
pub mod solvers;
pub mod spectrum;

pub use error::{Error, Result};
