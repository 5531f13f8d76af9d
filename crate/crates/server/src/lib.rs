//! HTTP service and command-line front end for `belief-store`.

pub mod api;
pub mod cli;
