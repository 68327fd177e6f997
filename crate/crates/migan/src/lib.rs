//! Model-informed Wasserstein GAN toolkit for DC optimal power flow.
//!
//! The pipeline: parse a MATPOWER-style case ([`case`]), assemble the DC
//! dispatch LP ([`opf`]), sample feasible dispatches ([`sampler`]), train a
//! clipped Wasserstein pair whose generated batches pass through a
//! model-informed selector ([`net`], [`selector`], [`gan`]), drive the outer
//! recursive loop ([`recursive`]), and verify optimality gaps against the
//! in-repo exact simplex oracle ([`simplex`]). [`experiment`] wires these into
//! seeded multi-trial runs, load-scaling sweeps and benchmarks; [`report`]
//! holds the result schemas and writers.
//!
//! The runnable `examples/` walk through each capability; the `migan` binary
//! exposes the same flows as subcommands (`solve`, `sample`, `train`,
//! `sweep-rho`, `bench`).

pub mod case;
pub mod experiment;
pub mod gan;
pub mod linalg;
pub mod net;
pub mod opf;
pub mod recursive;
pub mod report;
pub mod sampler;
pub mod selector;
pub mod simplex;

pub use case::PowerCase;
pub use gan::MiGanState;
pub use opf::{build_problem, Candidate, Feasibility, OpfProblem, SolutionModel};
pub use recursive::{run_recursive, RecursiveConfig};
pub use selector::SolutionPool;
pub use simplex::{solve_lp, verify_kkt, LpStatus};
