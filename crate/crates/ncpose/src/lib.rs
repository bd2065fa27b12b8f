//! File formats, synthetic benchmarks and the command line for
//! `ncpose-core`.
//!
//! * [`io`]: JSON mirrors, problems and solver options.
//! * [`synth`]: dataset generation, noise models and the Monte Carlo sweeps.
//! * [`cli`]: the `ncpose` binary's subcommands.

pub mod cli;
pub mod io;
pub mod synth;

pub use ncpose_core as core;
