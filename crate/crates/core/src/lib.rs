//! A benchmark harness for two-agent collaborative maze solving.
//!
//! Mazes are generated and split into two partial views, two agents talk
//! until they finish or run out of turns, and the free-form transcript is
//! graded by extracting the agreed route and replaying it under every
//! plausible coordinate convention.

pub mod agents;
pub mod maze;
pub mod protocol;
pub mod rollout;
pub mod store;
pub mod grading;
pub mod stats;
pub mod report;
pub mod experiment;
