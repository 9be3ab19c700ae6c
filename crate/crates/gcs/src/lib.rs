//! Ground-control station front end: CLI modes, the console socket and the
//! mission metadata endpoint.

pub mod cli;
pub mod protocol;
pub mod server;
