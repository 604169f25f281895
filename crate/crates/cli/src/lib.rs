//! `chatbridge` command-line front end.

pub mod app;
pub mod check;
pub mod config;
pub mod priming;
