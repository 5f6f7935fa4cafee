//! Command-line front end for `ftn-core`: JSON input documents, subcommand
//! dispatch, result caching and convergence traces.

pub mod app;
pub mod cache;
pub mod io;

pub use app::run;
