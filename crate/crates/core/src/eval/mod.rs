//! Evaluation: start/end drift over segment metrics and ELO ratings from A/B
//! judgments.

pub mod drift;
pub mod elo;
