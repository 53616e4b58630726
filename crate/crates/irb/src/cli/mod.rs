//! Config-driven front end: scenario files, builtin scenarios, artifact
//! export, and the command implementations used by the binary.

pub mod export;
pub mod runner;
pub mod scenario;
