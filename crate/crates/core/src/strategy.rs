//! Best candidate cutting of a region under a cutting strategy.

use crate::error::Error;
use crate::image::{ChannelSet, ImageBuffer, MAX_CHANNELS};
use crate::indicators::{best_channel, exact_indicator, optimal_sign_cut};
use crate::partition::{Axis, Cutting, Partition, RegionId};
use alloc::vec;
use alloc::vec::Vec;

/// Which positions of the axis-cut family are tried.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FamilyMode {
    /// Every interior row and column boundary of the region's bounding box.
    #[default]
    AllPositions,
    /// Only the boundary halving the bounding box along each axis.
    Midpoints,
}

/// How the best cutting of a region is found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CuttingStrategy {
    /// Exhaustive exact indicators over vertical and horizontal cuts.
    BestInFamily(FamilyMode),
    /// Sign cut of the channel with the largest first-order indicator,
    /// i.e. the maximizer of `||lambda||_inf` over all 2-partitions.
    #[default]
    OverallBest,
}

impl CuttingStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            CuttingStrategy::OverallBest => "overall-best",
            CuttingStrategy::BestInFamily(FamilyMode::AllPositions) => "best-in-family",
            CuttingStrategy::BestInFamily(FamilyMode::Midpoints) => "best-in-family-midpoints",
        }
    }
}

/// Best cutting found for one region.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSplit {
    pub region: RegionId,
    /// `None` when the region cannot be split under the strategy.
    pub cut: Option<Cutting>,
    /// Exact indicator of `cut` over the scored channels; zero iff unsplittable.
    pub delta_j: f64,
    /// Per-channel first-order indicator magnitudes: `lambda*^k` for the sign
    /// cut strategy, `|lambda^k|` of the selected cut for family cuts.
    pub lambda_star: [f64; MAX_CHANNELS],
    /// Channel whose sign cut was selected (sign cut strategy only).
    pub channel: Option<usize>,
}

impl CandidateSplit {
    fn unsplittable(region: RegionId, lambda_star: [f64; MAX_CHANNELS]) -> Self {
        CandidateSplit {
            region,
            cut: None,
            delta_j: 0.0,
            lambda_star,
            channel: None,
        }
    }

    pub fn is_splittable(&self) -> bool {
        self.delta_j > 0.0
    }
}

/// Dispatches on the strategy.
pub fn best_cut(
    strategy: CuttingStrategy,
    img: &ImageBuffer,
    partition: &Partition,
    region: RegionId,
    channels: ChannelSet,
) -> Result<CandidateSplit, Error> {
    match strategy {
        CuttingStrategy::OverallBest => best_cut_overall(img, partition, region, channels),
        CuttingStrategy::BestInFamily(mode) => best_cut_in_family(img, partition, region, mode, channels),
    }
}

#[derive(Clone, Copy, Default)]
struct Moments {
    count: usize,
    sum: [f64; MAX_CHANNELS],
}

impl Moments {
    fn add(&mut self, other: &Moments) {
        self.count += other.count;
        for k in 0..MAX_CHANNELS {
            self.sum[k] += other.sum[k];
        }
    }

    fn minus(&self, other: &Moments) -> Moments {
        let mut m = Moments {
            count: self.count - other.count,
            ..Moments::default()
        };
        for k in 0..MAX_CHANNELS {
            m.sum[k] = self.sum[k] - other.sum[k];
        }
        m
    }
}

fn split_gain(plus: &Moments, minus: &Moments, channels: ChannelSet) -> f64 {
    let pp = plus.count as f64;
    let pm = minus.count as f64;
    let weight = pp * pm / (2.0 * (pp + pm));
    channels
        .iter()
        .map(|k| {
            let diff = plus.sum[k] / pp - minus.sum[k] / pm;
            weight * diff * diff
        })
        .sum()
}

/// Exhaustive search of the axis-cut family by exact indicator.
///
/// Vertical cuts are tried before horizontal ones, each by increasing
/// position, and only a strictly larger indicator replaces the incumbent.
/// Cuts leaving one side of a non-rectangular region empty are skipped.
pub fn best_cut_in_family(
    img: &ImageBuffer,
    partition: &Partition,
    region: RegionId,
    mode: FamilyMode,
    channels: ChannelSet,
) -> Result<CandidateSplit, Error> {
    let r = partition.region(region)?;
    let bbox = r.bbox();
    let width = img.width();
    let mut cols = vec![Moments::default(); bbox.width()];
    let mut rows = vec![Moments::default(); bbox.height()];
    for &i in r.pixels() {
        let i = i as usize;
        let (x, y) = (i % width - bbox.x0, i / width - bbox.y0);
        cols[x].count += 1;
        rows[y].count += 1;
        for k in channels.iter() {
            let v = img.value(i, k);
            cols[x].sum[k] += v;
            rows[y].sum[k] += v;
        }
    }
    let mut total = Moments::default();
    for c in &cols {
        total.add(c);
    }

    let mut best: Option<(f64, Axis, usize, Moments)> = None;
    for (axis, lines, origin) in [(Axis::Vertical, &cols, bbox.x0), (Axis::Horizontal, &rows, bbox.y0)] {
        let positions: Vec<usize> = match mode {
            FamilyMode::AllPositions => (1..lines.len()).collect(),
            FamilyMode::Midpoints if lines.len() >= 2 => vec![lines.len() / 2],
            FamilyMode::Midpoints => Vec::new(),
        };
        let mut prefix = Moments::default();
        let mut consumed = 0;
        for j in positions {
            while consumed < j {
                prefix.add(&lines[consumed]);
                consumed += 1;
            }
            let rest = total.minus(&prefix);
            if prefix.count == 0 || rest.count == 0 {
                continue;
            }
            let gain = split_gain(&prefix, &rest, channels);
            if best.as_ref().is_none_or(|b| gain > b.0) {
                best = Some((gain, axis, origin + j, prefix));
            }
        }
    }

    let mut lambda = [0.0; MAX_CHANNELS];
    match best {
        Some((gain, axis, position, plus)) if gain > 0.0 => {
            let minus = total.minus(&plus);
            for k in channels.iter() {
                let mean = total.sum[k] / total.count as f64;
                let l = (plus.count as f64 * mean - plus.sum[k]) - (minus.count as f64 * mean - minus.sum[k]);
                lambda[k] = l.abs();
            }
            Ok(CandidateSplit {
                region,
                cut: Some(Cutting::Axis {
                    axis,
                    position: position as u32,
                }),
                delta_j: gain,
                lambda_star: lambda,
                channel: None,
            })
        }
        _ => Ok(CandidateSplit::unsplittable(region, lambda)),
    }
}

/// Sign cut of the channel maximizing `lambda*^k`, ranked by its exact indicator.
pub fn best_cut_overall(
    img: &ImageBuffer,
    partition: &Partition,
    region: RegionId,
    channels: ChannelSet,
) -> Result<CandidateSplit, Error> {
    let mut lambda_star = [0.0; MAX_CHANNELS];
    for k in channels.iter() {
        let sign = optimal_sign_cut(partition, region, img, k)?;
        if sign.valid {
            lambda_star[k] = sign.lambda_star;
        }
    }
    let best = best_channel(&lambda_star[..img.channel_count()]);
    if best.fully_constant {
        return Ok(CandidateSplit::unsplittable(region, lambda_star));
    }
    let cut = Cutting::Sign {
        channel: best.channel,
    };
    let (plus, minus) = partition.side_stats(region, &cut, img)?;
    let delta_j = exact_indicator(&plus, &minus, channels)?;
    if delta_j <= 0.0 {
        return Ok(CandidateSplit::unsplittable(region, lambda_star));
    }
    Ok(CandidateSplit {
        region,
        cut: Some(cut),
        delta_j,
        lambda_star,
        channel: Some(best.channel),
    })
}
