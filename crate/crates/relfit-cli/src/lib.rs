//! Support code for the `relfit` binary: run configuration files and report
//! serialization. Kept as a library so the config deserializer can be
//! exercised directly (tests, fuzzing).

pub mod config;
pub mod report;
