//! Command line front end: run configuration, branch-table cache, reports and the
//! experiment drivers.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
