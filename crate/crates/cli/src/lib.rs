//! Config files, run orchestration and sweeps behind the `hotspot` binary.

pub mod config;
pub mod scenario;
pub mod sweep;
