//! Library side of the `saddleflow` command: configuration merging, problem
//! loading, subcommand execution and trajectory CSV export.

pub mod config;
pub mod export;
pub mod runner;
pub mod source;

pub use config::{Flow, Options, RunConfig};
pub use export::{read_trajectory, write_trajectory};
pub use runner::{execute, Command, Outcome};
pub use source::{load_problem, ProblemSource};
