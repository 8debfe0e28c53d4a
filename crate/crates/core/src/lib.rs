//! Greedy adaptive segmentation of raster images.
//!
//! The image is approximated by a piecewise-constant color field over a
//! partition of its pixel grid. Starting from a single region, the engine
//! repeatedly splits the region whose best 2-partition yields the largest
//! decrease of the least-squares misfit
//!
//! ```text
//! J(c) = 1/2 * sum_i |d_i - c_i|^2
//! ```
//!
//! where `d` is the data and `c` the segmented image (region means).
//! Candidate cuttings are ranked by *exact indicators* (the true misfit
//! decrease) and, for the "overall best" strategy, generated analytically
//! from *first-order indicators* (signed gradient sums), which pick the
//! 2-partition of a region by the sign of the misfit gradient.
//!
//! Two kinds of segmentation are produced:
//!
//! * **vector**: one partition shared by all color channels,
//! * **multiscalar**: one partition per channel, combined by one of three
//!   multiscalar strategies.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the HTTP session service live in the companion `adaseg` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod engine;
mod error;
pub mod image;
pub mod indicators;
pub mod partition;
pub mod strategy;

pub use crate::engine::{
    EngineConfig, Evaluation, Mode, MultiscalarStrategy, RunOutcome, SegmentationState,
    SplitEvent, StepRecord, StopCriterion, StopStatus,
};
pub use crate::error::{EngineError, Error};
pub use crate::image::{ChannelSet, ImageBuffer, MAX_CHANNELS};
pub use crate::indicators::IndicatorResult;
pub use crate::partition::{Axis, Cutting, Partition, RegionId, RegionStats};
pub use crate::strategy::{CandidateSplit, CuttingStrategy, FamilyMode};
