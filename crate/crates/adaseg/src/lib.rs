//! Image IO, trace and session files, command-line front end and HTTP
//! session service for [`adaseg_core`].

pub mod cli;
pub mod export;
pub mod image_io;
pub mod server;
