//! Files, configuration, experiments and the `nuhyp` command line on top of
//! [`nuhyp_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod report;

pub use error::{Error, Result};
