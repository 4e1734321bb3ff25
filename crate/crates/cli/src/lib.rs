//! Configuration loading, subcommand drivers and result writers for the
//! `insgame` binary.

pub mod config;
pub mod output;
pub mod run;
