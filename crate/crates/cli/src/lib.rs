//! `metacp` command-line tool and local HTTP service.

pub mod commands;
pub mod server;
