//! Simulation engine for two-sided person-job matching.
//!
//! The engine role-plays interviewer and candidate agents over a pluggable
//! chat-completion backend, generates multi-turn mock interviews, renders
//! match decisions through a two-sided handshake with weighted-sigmoid score
//! fusion, refines agent strategies through reflection memory, and evaluates
//! whole campaigns with ranking, classification, and n-gram overlap metrics.

pub mod agents;
pub mod backend;
pub mod dialogue;
pub mod domain;
pub mod evaluation;
pub mod harness;
pub mod memory;
pub mod metrics;
pub mod text;
