//! Config documents, trace and summary files, and the command line.

pub mod cli;
pub mod config;
pub mod summary;
pub mod trace;
