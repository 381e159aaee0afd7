//! Command-line front end and SVG rendering for the `gnar` crate.

pub mod cli;
pub mod svg;

pub use cli::run;
