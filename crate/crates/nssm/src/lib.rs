//! Command-line tool, configuration and file formats for network
//! state-space models.

pub mod cli;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod manifest;
pub mod par;
