//! Downlink scheduling laboratory.
//!
//! - [`sim`]: deterministic TTI-stepped cell with finite buffers, block
//!   fading, AMC/OLLA and KPI accounting.
//! - [`sched`]: proportional fair, max C/I and round-robin baselines.
//! - [`genie`]: NSGA-II and Pareto list search over a known future.
//! - [`nn`]: small dense networks with manual backpropagation.
//! - [`a2c`]: the actor-critic scheduler, its training loop and evaluation.

pub mod a2c;
pub mod genie;
pub mod nn;
pub mod scenario;
pub mod sched;
pub mod score;
pub mod seeds;
pub mod sim;
