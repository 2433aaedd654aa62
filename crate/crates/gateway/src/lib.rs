//! HTTP service and command-line front end for the grounded well-being
//! chat engine in `avatarqa-core`.

pub mod api;
pub mod bundle_dir;
pub mod chat;
pub mod cli;
pub mod config;
pub mod transcript;
