//! HTTP service and command-line front end for the vocalize engine.

pub mod app;
pub mod cli;
pub mod config;
pub mod providers;
