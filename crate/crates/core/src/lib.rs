//! Random walks on Z^d with global observables.
//!
//! The crate samples lattice walks, evaluates bounded observables along
//! them, and computes the exact distribution of S_n on finite windows so
//! that means, second moments and local limit diagnostics can be obtained
//! without sampling error. On top of this sit the statistics used to check
//! laws of large numbers, the arcsine law, growth exponents of Birkhoff
//! sums, occupation times of drifting walks and the block construction of
//! an observable whose averages converge but whose Birkhoff averages do not.
//!
//! Modules:
//! - [`lattice_walk`]: step laws, trajectories, convolution kernels.
//! - [`observables`]: observable library, cube averages, decay fits.
//! - [`birkhoff`]: streaming Birkhoff sums, occupation tallies, block events.
//! - [`moments`]: exact first and second moments of T_N.
//! - [`statlab`]: ensembles, arcsine law, KS distance, exponent fits.
//! - [`chains`]: three-state absorbing chains and the walk-to-chain map.
#![allow(clippy::neg_cmp_op_on_partial_ord)]


pub mod birkhoff;
pub mod chains;
pub mod error;
pub mod lattice_walk;
pub mod moments;
pub mod numeric;
pub mod observables;
pub mod rng;
pub mod statlab;

pub use error::{Result, WalkError};
