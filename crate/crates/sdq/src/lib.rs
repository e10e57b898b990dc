//! Simulation and numerical analysis of single-server queues whose arrival
//! and service speeds depend on the current queue length.
//!
//! The toolkit covers the full pipeline from model description to
//! diffusion-scale diagnostics:
//!
//! - [`primitives`]: catalog of unit-mean inter-event distributions with
//!   exact moments, samplers, and truncated Laplace transforms.
//! - [`profile`]: queue-length-dependent speed functions, their heavy-traffic
//!   family indexed by `n`, and stability reports.
//! - [`simulator`]: exact event-driven simulation of the piecewise-linear
//!   Markov process `(L, R_e, R_d)` with time-weighted stationary estimates,
//!   plus the fluid-scaled trajectory check.
//! - [`palm`]: event-epoch (Palm) estimators, the arrival/departure intensity
//!   identities, the boundary identity, and the `H`/`Delta` correction
//!   statistics.
//! - [`clocks`]: the truncated-Laplace clock equations and their second-order
//!   expansions.
//! - [`analyzer`]: the closed-form limit density, the birth-death oracle for
//!   Markovian systems, Kolmogorov-Smirnov distances, and convergence studies.
//! - [`diffusion`]: reflected Euler scheme for the limiting diffusion.
//! - [`config`] / [`runner`]: experiment configs, replication management, and
//!   file emission used by the `sdq` binary.
//!
//! The `examples/` directory has one runnable example per capability; the
//! `sdq` binary exposes the same operations as subcommands driven by a JSON
//! config.

pub mod analyzer;
pub mod clocks;
pub mod config;
pub mod diffusion;
pub mod palm;
pub mod primitives;
pub mod profile;
pub mod runner;
pub mod simulator;

pub use analyzer::{birth_death_oracle, ks_distance, limit_density, Law, LimitDensity, ScaledLaw};
pub use clocks::{expansion_residual, solve_clocks, solve_clocks_with_cap, ClockSolution};
pub use diffusion::{simulate_rbm, RbmOptions};
pub use palm::PalmAccumulators;
pub use primitives::{RenewalKind, RenewalSpec};
pub use profile::{RegionRates, ScaledSystem, SpeedProfile};
pub use simulator::{run_fluid, run_stationary, EmpiricalLaw, RunOptions, SystemState};
