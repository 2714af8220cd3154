//! Command-line orchestration for the `latthom` library: configuration
//! parsing, experiment dispatch, artifact writing and the acceptance battery.

pub mod config;
pub mod experiments;
pub mod run;
pub mod suite;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
struct Guide;
