use alloc::vec::Vec;

use super::{SegmentationState, SplitEvent};
use crate::error::EngineError;

/// Stop conditions checked after every committed iteration; the run stops
/// as soon as any of the configured ones holds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StopCriterion {
    /// Stop once the number of uniform-color regions reaches this value.
    pub target_regions: Option<usize>,
    /// Stop once the number of scalar regions reaches this value.
    pub target_scalar_regions: Option<usize>,
    /// Stop once the explained-data percentage reaches this value.
    pub target_tau: Option<f64>,
    pub max_iterations: Option<usize>,
    /// Stop once J is at most this value.
    pub j_epsilon: Option<f64>,
}

impl StopCriterion {
    pub fn regions(n: usize) -> Self {
        StopCriterion {
            target_regions: Some(n),
            ..Self::default()
        }
    }

    pub fn scalar_regions(n: usize) -> Self {
        StopCriterion {
            target_scalar_regions: Some(n),
            ..Self::default()
        }
    }

    pub fn tau(percent: f64) -> Self {
        StopCriterion {
            target_tau: Some(percent),
            ..Self::default()
        }
    }

    pub fn iterations(n: usize) -> Self {
        StopCriterion {
            max_iterations: Some(n),
            ..Self::default()
        }
    }

    pub fn j_epsilon(eps: f64) -> Self {
        StopCriterion {
            j_epsilon: Some(eps),
            ..Self::default()
        }
    }

    /// Number of configured conditions.
    pub fn count(&self) -> usize {
        [
            self.target_regions.is_some(),
            self.target_scalar_regions.is_some(),
            self.target_tau.is_some(),
            self.max_iterations.is_some(),
            self.j_epsilon.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }

    pub fn is_met(&self, state: &SegmentationState) -> bool {
        self.target_regions.is_some_and(|n| state.n_vr() >= n)
            || self.target_scalar_regions.is_some_and(|n| state.n_sr() >= n)
            || self.target_tau.is_some_and(|t| state.tau() >= t)
            || self.max_iterations.is_some_and(|n| state.iteration() >= n)
            || self.j_epsilon.is_some_and(|e| state.j() <= e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StopStatus {
    /// A stop criterion fired.
    TargetReached,
    /// Every region is constant; the segmented image equals the data.
    Converged,
    /// No region can be split by the cutting family but J is positive.
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub status: StopStatus,
    pub events: Vec<SplitEvent>,
}

impl SegmentationState {
    /// Steps until a criterion fires or no region can be split.
    pub fn run(&mut self, stop: &StopCriterion) -> Result<RunOutcome, EngineError> {
        self.run_observed(stop, |_, _| {})
    }

    /// Like [`run`](Self::run), calling `observe` after every committed iteration.
    pub fn run_observed<F>(&mut self, stop: &StopCriterion, mut observe: F) -> Result<RunOutcome, EngineError>
    where
        F: FnMut(&SegmentationState, &[SplitEvent]),
    {
        if stop.count() == 0 {
            return Err(EngineError::NoStopCriterion);
        }
        let mut events = Vec::new();
        let status = loop {
            if stop.is_met(self) {
                break StopStatus::TargetReached;
            }
            match self.step() {
                Ok(step) => {
                    observe(self, &step);
                    events.extend(step);
                }
                Err(EngineError::Converged) => break StopStatus::Converged,
                Err(EngineError::Stalled { .. }) => break StopStatus::Stalled,
                Err(e) => return Err(e),
            }
        };
        Ok(RunOutcome { status, events })
    }
}
