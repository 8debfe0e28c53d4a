use thiserror::Error;

use crate::partition::RegionId;

/// Errors raised by image, partition and indicator operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("image has a zero dimension ({width}x{height})")]
    EmptyImage { width: usize, height: usize },
    #[error("unsupported channel count {0}, expected 1 or 3")]
    ChannelCount(usize),
    #[error("plane {plane} has {found} values, expected {expected}")]
    PlaneLength {
        plane: usize,
        expected: usize,
        found: usize,
    },
    #[error("pixel value out of [0, 255] or not finite in plane {plane} at index {index}")]
    ValueRange { plane: usize, index: usize },
    #[error("cutting has an empty side")]
    EmptyCutSide,
    #[error("unknown region {0}")]
    UnknownRegion(RegionId),
    #[error("cutting leaves one side of region {0} empty")]
    EmptySide(RegionId),
    #[error("cutting mask has {found} entries, region {region} has {expected} pixels")]
    MaskLength {
        region: RegionId,
        expected: usize,
        found: usize,
    },
    #[error("channel {0} is not present in the image")]
    UnknownChannel(usize),
    #[error("grid mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("label array has {found} entries, expected {expected}")]
    LabelLength { expected: usize, found: usize },
    #[error("region size must be at least 2, got {0}")]
    RegionTooSmall(usize),
    #[error("colors must be pairwise distinct")]
    DuplicateColor,
    #[error("image size {0} is too small for the synthetic layout (minimum 32)")]
    LayoutTooSmall(usize),
    #[error("synthetic shapes overlap")]
    OverlappingShapes,
    #[error("inclusion {0} is not contained in its host shape")]
    InclusionOutsideShape(usize),
}

/// Errors raised by the segmentation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Partition(#[from] Error),
    /// No region of any partition can be split and the segmented image equals the data.
    #[error("segmentation converged: every region is constant")]
    Converged,
    /// No region can be split by the active cutting family although the misfit is positive.
    #[error("segmentation stalled with J = {j}")]
    Stalled { j: f64 },
    #[error("channel partitions do not coincide; combine-best-components needs a vector partition")]
    PartitionsDiverged,
    #[error("nothing to undo")]
    EmptyHistory,
    #[error("mode {0} does not match the state")]
    ModeMismatch(&'static str),
    #[error("replay diverged at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("no stop criterion configured")]
    NoStopCriterion,
    #[error("initial partitions do not match the image or the mode")]
    InvalidStart,
}
