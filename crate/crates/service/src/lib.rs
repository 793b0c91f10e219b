//! HTTP service and command-line front end: query parsing, search over a
//! loaded index snapshot, per-session committed exemplars, auto-selection,
//! and SVG adaptation of committed exemplars with versioned outputs.

pub mod app;
pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod propose;
pub mod select;
pub mod session;
pub mod synth;

pub use app::App;
pub use config::ServiceConfig;
pub use error::ServiceError;
