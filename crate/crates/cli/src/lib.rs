//! Command-line driver for the `pslqe` integer relation finder.

pub mod cli;
pub mod commands;
pub mod report;
pub mod selftest;

pub use cli::run;
