//! Command line front end and live service for the `alphasoft` pipeline.

pub mod args;
pub mod server;
