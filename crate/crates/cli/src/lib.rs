//! File formats, report emission and the command-line front end for
//! `extcontrol-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod parallel;
pub mod report;
