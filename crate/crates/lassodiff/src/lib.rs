//! Std companion of `lassodiff-core`: a rayon [`Executor`](lassodiff_core::Executor),
//! JSON and CSV formats, run configuration and the `lassodiff` command line.

pub mod cli;
pub mod config;
pub mod exec;
pub mod formats;

pub use exec::RayonExecutor;
