//! Spontaneous emission of a three-level cascade atom coupled to
//! structured (non-Markovian) reservoirs.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod analytic;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod inversion;
pub mod kernel;
pub mod lu;
pub mod pseudomode;
pub mod quadrature;
pub mod reservoir;
pub mod solver;

pub use error::{Error, Result};
pub use kernel::{build_kernel, KernelSystem, LaplaceNode};
pub use quadrature::FrequencyGrid;
pub use reservoir::{AtomParams, LorentzianProfile, Profile, ReservoirSpec, Topology, Transition};
pub use solver::{solve_complex, solve_real_block, AmplitudeSolution};
