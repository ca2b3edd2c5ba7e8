//! Files, command line and network service around `gazegrammar-core`.

pub mod cli;
pub mod config;
pub mod output;
pub mod protocol;
pub mod replay;
pub mod server;
pub mod session;
