//! Iterative refinement: vector and multiscalar segmentation.
//!
//! A [`SegmentationState`] holds one partition per *layer*: a single layer
//! scored on all channels in vector mode, one layer per channel in
//! multiscalar mode. Each layer caches the best candidate cutting of every
//! region; since a candidate only depends on its region, a step only
//! evaluates the regions it creates.
//!
//! Ties are broken deterministically everywhere (smaller region id, channel
//! order R, G, B), so a history of steps can be replayed bit for bit. Undo
//! restores the closest snapshot and replays forward.

mod stop;

pub use self::stop::{RunOutcome, StopCriterion, StopStatus};

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{EngineError, Error};
use crate::image::{ChannelSet, ImageBuffer, MAX_CHANNELS};
use crate::indicators::{channel_exact_indicator, exact_indicator};
use crate::partition::{Cutting, Partition, RegionId, RegionStats};
use crate::strategy::{best_cut, CandidateSplit, CuttingStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Mode {
    /// One partition shared by all channels.
    #[default]
    Vector,
    /// One partition per channel.
    Multiscalar,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Vector => "vector",
            Mode::Multiscalar => "multiscalar",
        }
    }
}

/// How the per-channel tentative splits are committed in multiscalar mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MultiscalarStrategy {
    /// Commit only the channel with the largest tentative decrease.
    #[default]
    BestComponentOnly,
    /// Commit every channel's tentative split to its own partition.
    BestComponentForEach,
    /// Apply all tentative cuts to all channels of a shared partition.
    CombineBestComponents,
}

impl MultiscalarStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            MultiscalarStrategy::BestComponentOnly => "best-component-only",
            MultiscalarStrategy::BestComponentForEach => "best-component-for-each",
            MultiscalarStrategy::CombineBestComponents => "combine-best-components",
        }
    }
}

/// Candidate evaluation policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Evaluation {
    /// Evaluate only the regions created by the previous step.
    #[default]
    Incremental,
    /// Re-evaluate every region at every step. Reference behavior.
    FullRescan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EngineConfig {
    pub mode: Mode,
    pub cutting: CuttingStrategy,
    pub multiscalar: MultiscalarStrategy,
    pub evaluation: Evaluation,
    pub snapshot_interval: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Vector,
            cutting: CuttingStrategy::OverallBest,
            multiscalar: MultiscalarStrategy::BestComponentOnly,
            evaluation: Evaluation::Incremental,
            snapshot_interval: 64,
        }
    }
}

impl EngineConfig {
    pub fn vector(cutting: CuttingStrategy) -> Self {
        EngineConfig {
            cutting,
            ..Self::default()
        }
    }

    pub fn multiscalar(cutting: CuttingStrategy, strategy: MultiscalarStrategy) -> Self {
        EngineConfig {
            mode: Mode::Multiscalar,
            cutting,
            multiscalar: strategy,
            ..Self::default()
        }
    }
}

/// One committed split.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitEvent {
    pub iteration: usize,
    pub mode: Mode,
    pub cutting: CuttingStrategy,
    pub multiscalar: Option<MultiscalarStrategy>,
    /// Channels whose partition changed (the channel whose cut was applied
    /// for combine-best-components).
    pub channels: ChannelSet,
    /// Region id before the split, in the partition of the first affected channel.
    pub region: RegionId,
    pub cut: Cutting,
    /// Realized decrease of J.
    pub delta_j: f64,
    pub n_sr: usize,
    pub n_vr: usize,
    pub j: f64,
    pub tau: f64,
}

/// The events of one iteration together with the strategies that produced them.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub cutting: CuttingStrategy,
    pub multiscalar: Option<MultiscalarStrategy>,
    pub events: Vec<SplitEvent>,
}

/// Best split of one channel in multiscalar mode, not yet committed.
#[derive(Clone, Debug, PartialEq)]
pub struct TentativeSplit {
    pub channel: usize,
    pub region: RegionId,
    pub cut: Cutting,
    pub delta_j: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    partition: Partition,
    channels: ChannelSet,
    cache: BTreeMap<RegionId, CandidateSplit>,
}

impl Layer {
    fn evaluate(&self, img: &ImageBuffer, strategy: CuttingStrategy, id: RegionId) -> CandidateSplit {
        // ids come from the partition itself
        best_cut(strategy, img, &self.partition, id, self.channels).expect("live region")
    }

    fn rebuild(&mut self, img: &ImageBuffer, strategy: CuttingStrategy) {
        let cache = self
            .partition
            .regions()
            .map(|(id, _)| (id, self.evaluate(img, strategy, id)))
            .collect();
        self.cache = cache;
    }

    /// Largest cached exact indicator, smaller region id on ties.
    fn best(&self) -> Option<&CandidateSplit> {
        let mut best: Option<&CandidateSplit> = None;
        for c in self.cache.values() {
            if c.is_splittable() && best.is_none_or(|b| c.delta_j > b.delta_j) {
                best = Some(c);
            }
        }
        best
    }
}

/// Everything a step mutates; cloned for snapshots.
#[derive(Clone, Debug, PartialEq)]
struct Frame {
    layers: Vec<Layer>,
    cache_strategy: CuttingStrategy,
    j: f64,
    iteration: usize,
    /// Multiscalar only: pixel count per tuple of per-layer labels.
    cells: BTreeMap<[u32; MAX_CHANNELS], u32>,
}

/// Regions created and retired per layer during one step.
#[derive(Default)]
struct Changes {
    created: Vec<Vec<RegionId>>,
    retired: Vec<Vec<RegionId>>,
}

/// Segmentation of one image: partitions, candidate caches, J and history.
#[derive(Clone, Debug)]
pub struct SegmentationState {
    image: Arc<ImageBuffer>,
    config: EngineConfig,
    data_norm: f64,
    j_initial: f64,
    frame: Frame,
    history: Vec<StepRecord>,
    snapshots: Vec<Frame>,
}

impl PartialEq for SegmentationState {
    /// Compares image, configuration, current partitions, caches, J and history.
    fn eq(&self, other: &Self) -> bool {
        self.image == other.image
            && self.config == other.config
            && self.frame == other.frame
            && self.history == other.history
    }
}

impl SegmentationState {
    /// One-region partitions for every layer, colored by the channel means.
    pub fn init(image: Arc<ImageBuffer>, config: EngineConfig) -> Result<Self, EngineError> {
        let layers = match config.mode {
            Mode::Vector => 1,
            Mode::Multiscalar => image.channel_count(),
        };
        let start = vec![Partition::single_region(&image); layers];
        Self::init_from(image, config, start)
    }

    /// Starts from arbitrary partitions: one for vector mode, one per channel
    /// for multiscalar mode. Combine-best-components requires them to
    /// coincide.
    pub fn init_from(
        image: Arc<ImageBuffer>,
        config: EngineConfig,
        start: Vec<Partition>,
    ) -> Result<Self, EngineError> {
        let expected = match config.mode {
            Mode::Vector => 1,
            Mode::Multiscalar => image.channel_count(),
        };
        if start.len() != expected
            || start
                .iter()
                .any(|p| p.width() != image.width() || p.height() != image.height())
        {
            return Err(EngineError::InvalidStart);
        }
        if config.mode == Mode::Multiscalar
            && config.multiscalar == MultiscalarStrategy::CombineBestComponents
            && !start.iter().all(|p| p.same_structure(&start[0]))
        {
            return Err(EngineError::PartitionsDiverged);
        }
        if config.snapshot_interval == 0 {
            return Err(EngineError::InvalidStart);
        }
        let layers: Vec<Layer> = start
            .into_iter()
            .enumerate()
            .map(|(k, partition)| {
                let channels = match config.mode {
                    Mode::Vector => image.channels(),
                    Mode::Multiscalar => ChannelSet::single(k),
                };
                let mut layer = Layer {
                    partition,
                    channels,
                    cache: BTreeMap::new(),
                };
                layer.rebuild(&image, config.cutting);
                layer
            })
            .collect();
        let j = layers.iter().map(|l| l.partition.misfit(l.channels)).sum();
        let mut cells = BTreeMap::new();
        if config.mode == Mode::Multiscalar {
            for i in 0..image.pixel_count() {
                *cells.entry(cell_key(&layers, i)).or_insert(0) += 1;
            }
        }
        let frame = Frame {
            layers,
            cache_strategy: config.cutting,
            j,
            iteration: 0,
            cells,
        };
        Ok(SegmentationState {
            data_norm: image.norm(),
            j_initial: j,
            image,
            config,
            snapshots: vec![frame.clone()],
            frame,
            history: Vec::new(),
        })
    }

    /// Re-runs `records` from the initial state and checks that every step
    /// reproduces its recorded events exactly.
    pub fn replay(
        image: Arc<ImageBuffer>,
        config: EngineConfig,
        records: &[StepRecord],
    ) -> Result<Self, EngineError> {
        let mut state = Self::init(image, config)?;
        for (n, record) in records.iter().enumerate() {
            let diverged = EngineError::Divergence { iteration: n + 1 };
            state.set_cutting_strategy(record.cutting);
            if let Some(ms) = record.multiscalar {
                state.set_multiscalar_strategy(ms).map_err(|_| diverged.clone())?;
            }
            let events = state.step().map_err(|_| diverged.clone())?;
            if events != record.events {
                return Err(diverged);
            }
        }
        Ok(state)
    }

    pub fn image(&self) -> &Arc<ImageBuffer> {
        &self.image
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn iteration(&self) -> usize {
        self.frame.iteration
    }

    /// Current misfit J, maintained by subtracting realized decreases.
    pub fn j(&self) -> f64 {
        self.frame.j
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    /// All events so far, in commit order.
    pub fn events(&self) -> impl Iterator<Item = &SplitEvent> {
        self.history.iter().flat_map(|r| r.events.iter())
    }

    /// Number of partitions: 1 in vector mode, one per channel otherwise.
    pub fn layer_count(&self) -> usize {
        self.frame.layers.len()
    }

    pub fn partition(&self, layer: usize) -> &Partition {
        &self.frame.layers[layer].partition
    }

    /// Channels scored by `layer`.
    pub fn layer_channels(&self, layer: usize) -> ChannelSet {
        self.frame.layers[layer].channels
    }

    pub fn cached_candidate(&self, layer: usize, region: RegionId) -> Option<&CandidateSplit> {
        self.frame.layers[layer].cache.get(&region)
    }

    pub fn cached_candidates(&self, layer: usize) -> impl Iterator<Item = &CandidateSplit> {
        self.frame.layers[layer].cache.values()
    }

    /// Number of scalar regions: regions summed over channels.
    pub fn n_sr(&self) -> usize {
        match self.config.mode {
            Mode::Vector => self.partition(0).region_count() * self.image.channel_count(),
            Mode::Multiscalar => self.frame.layers.iter().map(|l| l.partition.region_count()).sum(),
        }
    }

    /// Number of uniform-color regions: regions of the superimposition of all layers.
    pub fn n_vr(&self) -> usize {
        match self.config.mode {
            Mode::Vector => self.partition(0).region_count(),
            Mode::Multiscalar => self.frame.cells.len(),
        }
    }

    /// Percentage of explained data, `100 * (1 - ||d - c|| / ||d||)`.
    pub fn tau(&self) -> f64 {
        tau_of(self.frame.j, self.data_norm)
    }

    /// True if all layers group pixels identically.
    pub fn channels_coincide(&self) -> bool {
        let first = &self.frame.layers[0].partition;
        self.frame.layers.iter().all(|l| l.partition.same_structure(first))
    }

    /// The superimposition of all layers (the partition itself in vector mode).
    pub fn vector_partition(&self) -> Partition {
        let mut p = self.frame.layers[0].partition.clone();
        for layer in &self.frame.layers[1..] {
            p = p.superimpose(&layer.partition, &self.image).expect("same grid");
        }
        p
    }

    /// The segmented image `c`, one plane per channel.
    pub fn segmented(&self) -> Vec<Vec<f64>> {
        match self.config.mode {
            Mode::Vector => self.partition(0).paint(&self.image),
            Mode::Multiscalar => self
                .frame
                .layers
                .iter()
                .enumerate()
                .map(|(k, l)| {
                    let mut plane = vec![0.0; self.image.pixel_count()];
                    l.partition.paint_channel(k, &mut plane);
                    plane
                })
                .collect(),
        }
    }

    /// `1/2 ||d - c||^2` recomputed pixel by pixel.
    pub fn misfit_from_scratch(&self) -> f64 {
        let c = self.segmented();
        let mut j = 0.0;
        for (k, plane) in c.iter().enumerate() {
            for (d, c) in self.image.plane(k).iter().zip(plane) {
                j += 0.5 * (d - c) * (d - c);
            }
        }
        j
    }

    /// True when every region of every layer is constant in its channels,
    /// i.e. the segmented image equals the data.
    pub fn is_exact(&self) -> bool {
        self.frame.layers.iter().all(|l| {
            l.partition
                .regions()
                .all(|(_, r)| r.stats().is_constant_in(l.channels))
        })
    }

    /// Switches the cutting strategy for subsequent steps. Caches are rebuilt.
    pub fn set_cutting_strategy(&mut self, strategy: CuttingStrategy) {
        self.config.cutting = strategy;
        if self.frame.cache_strategy != strategy {
            for layer in &mut self.frame.layers {
                layer.rebuild(&self.image, strategy);
            }
            self.frame.cache_strategy = strategy;
        }
    }

    /// Switches the multiscalar strategy. Combining requires coinciding
    /// channel partitions.
    pub fn set_multiscalar_strategy(&mut self, strategy: MultiscalarStrategy) -> Result<(), EngineError> {
        if self.config.mode != Mode::Multiscalar {
            return Err(EngineError::ModeMismatch("vector"));
        }
        if strategy == MultiscalarStrategy::CombineBestComponents && !self.channels_coincide() {
            return Err(EngineError::PartitionsDiverged);
        }
        self.config.multiscalar = strategy;
        Ok(())
    }

    /// Best uncommitted split of channel `k` in multiscalar mode; `None` once
    /// the channel is fully segmented.
    pub fn tentative_split(&self, k: usize) -> Option<TentativeSplit> {
        if self.config.mode != Mode::Multiscalar {
            return None;
        }
        let layer = self.frame.layers.get(k)?;
        layer.best().map(|c| TentativeSplit {
            channel: k,
            region: c.region,
            cut: c.cut.clone().expect("splittable candidate has a cut"),
            delta_j: c.delta_j,
        })
    }

    /// Commits one iteration with the current strategies.
    pub fn step(&mut self) -> Result<Vec<SplitEvent>, EngineError> {
        let cutting = self.config.cutting;
        let multiscalar = match self.config.mode {
            Mode::Vector => None,
            Mode::Multiscalar => Some(self.config.multiscalar),
        };
        let events = self.apply_step(cutting, multiscalar)?;
        self.history.push(StepRecord {
            cutting,
            multiscalar,
            events: events.clone(),
        });
        if self.frame.iteration.is_multiple_of(self.config.snapshot_interval) {
            self.snapshots.push(self.frame.clone());
        }
        Ok(events)
    }

    /// Vector iteration: split the region with the largest exact indicator.
    pub fn step_vector(&mut self) -> Result<SplitEvent, EngineError> {
        if self.config.mode != Mode::Vector {
            return Err(EngineError::ModeMismatch("multiscalar"));
        }
        Ok(self.step()?.remove(0))
    }

    /// Multiscalar iteration under the current multiscalar strategy.
    pub fn step_multiscalar(&mut self) -> Result<Vec<SplitEvent>, EngineError> {
        if self.config.mode != Mode::Multiscalar {
            return Err(EngineError::ModeMismatch("vector"));
        }
        self.step()
    }

    /// Reverts the last committed iteration.
    pub fn undo(&mut self) -> Result<(), EngineError> {
        let record = self.history.pop().ok_or(EngineError::EmptyHistory)?;
        let target = self.frame.iteration - 1;
        while self.snapshots.last().is_some_and(|s| s.iteration > target) {
            self.snapshots.pop();
        }
        self.frame = self.snapshots.last().expect("initial snapshot").clone();
        for n in self.frame.iteration..target {
            let r = self.history[n].clone();
            let events = self.apply_step(r.cutting, r.multiscalar)?;
            debug_assert_eq!(events, r.events);
        }
        if let Some(ms) = record.multiscalar {
            self.config.multiscalar = ms;
        }
        self.set_cutting_strategy(record.cutting);
        Ok(())
    }

    fn terminal(&self) -> EngineError {
        if self.is_exact() {
            EngineError::Converged
        } else {
            EngineError::Stalled { j: self.frame.j }
        }
    }

    fn apply_step(
        &mut self,
        cutting: CuttingStrategy,
        multiscalar: Option<MultiscalarStrategy>,
    ) -> Result<Vec<SplitEvent>, EngineError> {
        if self.config.evaluation == Evaluation::FullRescan || self.frame.cache_strategy != cutting {
            for layer in &mut self.frame.layers {
                layer.rebuild(&self.image, cutting);
            }
            self.frame.cache_strategy = cutting;
        }
        let mut changes = Changes {
            created: vec![Vec::new(); self.frame.layers.len()],
            retired: vec![Vec::new(); self.frame.layers.len()],
        };
        let iteration = self.frame.iteration + 1;
        let events = match (self.config.mode, multiscalar) {
            (Mode::Vector, _) => {
                let best = self.frame.layers[0].best().cloned().ok_or_else(|| self.terminal())?;
                let cut = best.cut.expect("splittable candidate has a cut");
                let delta_j = self.commit_layer(0, best.region, &cut, &mut changes)?;
                vec![self.event(iteration, cutting, None, ChannelSet::single(0), best.region, cut, delta_j)]
            }
            (Mode::Multiscalar, None) => return Err(EngineError::ModeMismatch("vector")),
            (Mode::Multiscalar, Some(strategy)) => {
                let tentatives: Vec<TentativeSplit> = (0..self.frame.layers.len())
                    .filter_map(|k| {
                        self.frame.layers[k].best().map(|c| TentativeSplit {
                            channel: k,
                            region: c.region,
                            cut: c.cut.clone().expect("splittable candidate has a cut"),
                            delta_j: c.delta_j,
                        })
                    })
                    .collect();
                if tentatives.is_empty() {
                    return Err(self.terminal());
                }
                match strategy {
                    MultiscalarStrategy::BestComponentOnly => {
                        let mut chosen = &tentatives[0];
                        for t in &tentatives[1..] {
                            if t.delta_j > chosen.delta_j {
                                chosen = t;
                            }
                        }
                        let t = chosen.clone();
                        let delta_j = self.commit_layer(t.channel, t.region, &t.cut, &mut changes)?;
                        vec![self.event(iteration, cutting, multiscalar, ChannelSet::single(t.channel), t.region, t.cut, delta_j)]
                    }
                    MultiscalarStrategy::BestComponentForEach => {
                        let mut events = Vec::new();
                        for t in tentatives {
                            let delta_j = self.commit_layer(t.channel, t.region, &t.cut, &mut changes)?;
                            events.push(self.event(iteration, cutting, multiscalar, ChannelSet::single(t.channel), t.region, t.cut, delta_j));
                        }
                        events
                    }
                    MultiscalarStrategy::CombineBestComponents => {
                        if !self.channels_coincide() {
                            return Err(EngineError::PartitionsDiverged);
                        }
                        self.commit_combined(iteration, cutting, multiscalar, tentatives, &mut changes)?
                    }
                }
            }
        };
        for (k, layer) in self.frame.layers.iter_mut().enumerate() {
            for id in &changes.retired[k] {
                layer.cache.remove(id);
            }
            for &id in &changes.created[k] {
                if layer.partition.contains(id) {
                    let candidate = layer.evaluate(&self.image, cutting, id);
                    layer.cache.insert(id, candidate);
                }
            }
        }
        self.frame.iteration = iteration;
        Ok(events)
    }

    #[allow(clippy::too_many_arguments)]
    fn event(
        &self,
        iteration: usize,
        cutting: CuttingStrategy,
        multiscalar: Option<MultiscalarStrategy>,
        channels: ChannelSet,
        region: RegionId,
        cut: Cutting,
        delta_j: f64,
    ) -> SplitEvent {
        let channels = match self.config.mode {
            Mode::Vector => self.image.channels(),
            Mode::Multiscalar => channels,
        };
        SplitEvent {
            iteration,
            mode: self.config.mode,
            cutting,
            multiscalar,
            channels,
            region,
            cut,
            delta_j,
            n_sr: self.n_sr(),
            n_vr: self.n_vr(),
            j: self.frame.j,
            tau: self.tau(),
        }
    }

    /// Splits `region` of one layer and returns the realized decrease of J.
    fn commit_layer(
        &mut self,
        k: usize,
        region: RegionId,
        cut: &Cutting,
        changes: &mut Changes,
    ) -> Result<f64, Error> {
        let channels = self.frame.layers[k].channels;
        let (a, b) = self.split_layer(k, region, cut, changes)?;
        let p = &self.frame.layers[k].partition;
        let delta_j = exact_indicator(p.region(a)?.stats(), p.region(b)?.stats(), channels)?;
        self.decrease_j(delta_j);
        Ok(delta_j)
    }

    /// Subtracts a realized decrease from J. Close to zero, J is re-summed
    /// from the region statistics so that an exact segmentation has J = 0.
    fn decrease_j(&mut self, delta_j: f64) {
        self.frame.j -= delta_j;
        if self.frame.j <= 1e-9 * self.j_initial {
            self.frame.j = self
                .frame
                .layers
                .iter()
                .map(|l| l.partition.misfit(l.channels))
                .sum();
        }
    }

    fn split_layer(
        &mut self,
        k: usize,
        region: RegionId,
        cut: &Cutting,
        changes: &mut Changes,
    ) -> Result<(RegionId, RegionId), Error> {
        let (a, b) = self.frame.layers[k].partition.split(region, cut, &self.image)?;
        changes.retired[k].push(region);
        changes.created[k].push(a);
        changes.created[k].push(b);
        if self.config.mode == Mode::Multiscalar {
            let frame = &mut self.frame;
            for child in [a, b] {
                for &i in frame.layers[k].partition.region(child)?.pixels() {
                    let new = cell_key(&frame.layers, i as usize);
                    let mut old = new;
                    old[k] = region.0;
                    let count = frame.cells.get_mut(&old).expect("tracked cell");
                    *count -= 1;
                    if *count == 0 {
                        frame.cells.remove(&old);
                    }
                    *frame.cells.entry(new).or_insert(0) += 1;
                }
            }
        }
        Ok((a, b))
    }

    /// Superimposes the tentative cuts of all channels on the shared
    /// partition and applies the result to every layer.
    ///
    /// Cuts are applied in channel order; each one refines every piece of
    /// its region produced so far. A refinement whose two sides have equal
    /// mean colors is not applied, so every emitted event has a positive
    /// decrease.
    fn commit_combined(
        &mut self,
        iteration: usize,
        cutting: CuttingStrategy,
        multiscalar: Option<MultiscalarStrategy>,
        tentatives: Vec<TentativeSplit>,
        changes: &mut Changes,
    ) -> Result<Vec<SplitEvent>, EngineError> {
        let img = Arc::clone(&self.image);
        let all = img.channels();
        // group the cuts by targeted region, keyed by the region's first pixel
        let mut groups: Vec<(u32, Vec<MaskedCut>)> = Vec::new();
        for t in tentatives {
            let partition = &self.frame.layers[t.channel].partition;
            let first = partition.region(t.region)?.pixels()[0];
            let mask = partition.cut_mask(t.region, &t.cut, &img)?;
            match groups.iter_mut().find(|(p, _)| *p == first) {
                Some((_, cuts)) => cuts.push((t, mask)),
                None => groups.push((first, vec![(t, mask)])),
            }
        }

        let mut events = Vec::new();
        for (first, cuts) in groups {
            let id0 = self.frame.layers[0].partition.label(first as usize);
            let parent: Vec<u32> = self.frame.layers[0].partition.region(id0)?.pixels().to_vec();
            let mut pieces: Vec<Vec<u32>> = vec![parent.clone()];
            for (t, mask) in cuts {
                let mut realized = 0.0;
                let mut next = Vec::with_capacity(pieces.len() * 2);
                for piece in pieces {
                    let restricted = restrict_mask(&parent, &mask, &piece);
                    let plus_count = restricted.iter().filter(|&&s| s).count();
                    if plus_count == 0 || plus_count == piece.len() {
                        next.push(piece);
                        continue;
                    }
                    let (plus, minus): (Vec<u32>, Vec<u32>) = {
                        let mut plus = Vec::with_capacity(plus_count);
                        let mut minus = Vec::with_capacity(piece.len() - plus_count);
                        for (&i, &s) in piece.iter().zip(&restricted) {
                            if s {
                                plus.push(i);
                            } else {
                                minus.push(i);
                            }
                        }
                        (plus, minus)
                    };
                    let sp = RegionStats::accumulate(&img, plus.iter().map(|&i| i as usize));
                    let sm = RegionStats::accumulate(&img, minus.iter().map(|&i| i as usize));
                    let gain: f64 = all.iter().map(|k| channel_exact_indicator(&sp, &sm, k)).sum();
                    if gain <= 0.0 {
                        next.push(piece);
                        continue;
                    }
                    let cut = Cutting::Mask { plus: restricted };
                    for l in 0..self.frame.layers.len() {
                        let id = self.frame.layers[l].partition.label(piece[0] as usize);
                        self.split_layer(l, id, &cut, changes)?;
                    }
                    self.decrease_j(gain);
                    realized += gain;
                    next.push(plus);
                    next.push(minus);
                }
                pieces = next;
                if realized > 0.0 {
                    events.push(self.event(
                        iteration,
                        cutting,
                        multiscalar,
                        ChannelSet::single(t.channel),
                        t.region,
                        t.cut,
                        realized,
                    ));
                }
            }
        }
        if events.is_empty() {
            return Err(self.terminal());
        }
        Ok(events)
    }
}

/// A tentative cut with its side assignment over the targeted region.
type MaskedCut = (TentativeSplit, Vec<bool>);

fn cell_key(layers: &[Layer], pixel: usize) -> [u32; MAX_CHANNELS] {
    let mut key = [0u32; MAX_CHANNELS];
    for (k, layer) in layers.iter().enumerate() {
        key[k] = layer.partition.label(pixel).0;
    }
    key
}

/// Side assignment of `piece` (a sorted subset of `parent`) under a mask
/// defined over `parent`.
fn restrict_mask(parent: &[u32], mask: &[bool], piece: &[u32]) -> Vec<bool> {
    let mut out = Vec::with_capacity(piece.len());
    let mut j = 0;
    for &i in piece {
        while parent[j] != i {
            j += 1;
        }
        out.push(mask[j]);
    }
    out
}

pub(crate) fn tau_of(j: f64, data_norm: f64) -> f64 {
    let j = j.max(0.0);
    if data_norm == 0.0 {
        return if j == 0.0 { 100.0 } else { 0.0 };
    }
    (100.0 * (1.0 - libm::sqrt(2.0 * j) / data_norm)).clamp(0.0, 100.0)
}

#[cfg(test)]
mod tests;
