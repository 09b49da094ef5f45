//! Context packing for next-frame-section video predictors.
//!
//! The crate covers the full life of a packing schedule:
//!
//! - [`schedule`] parses and formats schedule names such as
//!   `td_f16k4f2k2f1k1_g9_x_f1k1` and classifies the sampling order they imply.
//! - [`ledger`] does the token arithmetic: geometric per-frame lengths, their
//!   convergence bound, arbitrary-rate decompositions and per-schedule budgets.
//! - [`packing`] applies a schedule to a latent history and emits tokens with
//!   full provenance. Token features are mean-pooled stand-ins for learned
//!   patchify projections.
//! - [`rope`] builds axial rotary phases, pools them to match kernels and
//!   supports non-contiguous time indices.
//! - [`importance`] ranks history frames by cosine, time or hybrid similarity.
//! - [`codebook`] fits a K-means codebook over latent pixels and discretizes
//!   history frames.
//! - [`planner`] produces generation plans for vanilla, endpoint, inverted and
//!   multi-endpoint sampling.
//! - [`eval`] computes start/end drift and ELO ratings.
//! - [`container`] reads and writes the little-endian FPLT tensor file.

pub mod codebook;
pub mod container;
pub mod eval;
pub mod importance;
pub mod ledger;
pub mod packing;
pub mod planner;
pub mod rope;
pub mod schedule;
pub mod video;

pub use codebook::{Codebook, FitConfig, IndexMap};
pub use container::{FpltError, FpltFile};
pub use eval::drift::{drift, DriftReport, SegmentMetric};
pub use eval::elo::{MatchRecord, Outcome, RatingTable};
pub use ledger::{BudgetParams, Divisibility, RateDecomposition};
pub use packing::{PackOptions, PackedContext, PackedToken};
pub use planner::{GenerationPlan, Iteration, PlanMode};
pub use rope::PhaseGrid;
pub use schedule::{KernelSpec, PackingSchedule, SamplingMode, Segment, TailMode};
pub use video::LatentVideo;
