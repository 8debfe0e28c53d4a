//! Pixel-to-region labelings with per-region sufficient statistics.
//!
//! A [`Partition`] keeps, for every region, its sorted pixel list, its
//! bounding box and the per-channel moments `(count, sum, sum of squares)`
//! together with the channel extrema. Means and least-squares misfits are
//! O(1) from those moments; a split costs O(|R|).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::Error;
use crate::image::{ChannelSet, ImageBuffer, MAX_CHANNELS};

/// Region identifier. Ids are never reused within one partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Moments and extrema of one channel over one region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelStats {
    pub sum: f64,
    pub sum_sq: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for ChannelStats {
    fn default() -> Self {
        ChannelStats {
            sum: 0.0,
            sum_sq: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

/// Sufficient statistics of a region: pixel count and per-channel moments.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionStats {
    pixel_count: usize,
    channels: [ChannelStats; MAX_CHANNELS],
    channel_count: usize,
}

impl RegionStats {
    /// Accumulates statistics over the given pixels, in iteration order.
    pub fn accumulate<I>(img: &ImageBuffer, pixels: I) -> Self
    where
        I: IntoIterator<Item = usize>,
    {
        let channel_count = img.channel_count();
        let mut channels = [ChannelStats::default(); MAX_CHANNELS];
        let mut pixel_count = 0;
        for i in pixels {
            pixel_count += 1;
            for (k, c) in channels.iter_mut().enumerate().take(channel_count) {
                let v = img.value(i, k);
                c.sum += v;
                c.sum_sq += v * v;
                c.min = c.min.min(v);
                c.max = c.max.max(v);
            }
        }
        RegionStats {
            pixel_count,
            channels,
            channel_count,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn channel(&self, k: usize) -> &ChannelStats {
        &self.channels[k]
    }

    /// Optimal segmented intensity of channel `k`: the region mean.
    #[inline]
    pub fn mean(&self, k: usize) -> f64 {
        self.channels[k].sum / self.pixel_count as f64
    }

    /// `1/2 * sum (d_i - mean)^2` for channel `k`, from the moments.
    pub fn channel_misfit(&self, k: usize) -> f64 {
        let c = &self.channels[k];
        let v = 0.5 * (c.sum_sq - c.sum * c.sum / self.pixel_count as f64);
        v.max(0.0)
    }

    /// Region contribution to the misfit at its optimal color, summed over `channels`.
    pub fn misfit(&self, channels: ChannelSet) -> f64 {
        channels.iter().map(|k| self.channel_misfit(k)).sum()
    }

    /// True when every pixel of the region has the same value in channel `k`.
    pub fn is_constant(&self, k: usize) -> bool {
        self.channels[k].max - self.channels[k].min == 0.0
    }

    pub fn is_constant_in(&self, channels: ChannelSet) -> bool {
        channels.iter().all(|k| self.is_constant(k))
    }
}

/// Mean of channel `k` over a region.
pub fn region_mean(stats: &RegionStats, k: usize) -> f64 {
    stats.mean(k)
}

/// Region contribution to J at its optimal color, over all image channels.
pub fn region_misfit(stats: &RegionStats) -> f64 {
    stats.misfit(ChannelSet::first(stats.channel_count))
}

/// Inclusive pixel bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    fn of<I: IntoIterator<Item = usize>>(width: usize, pixels: I) -> Self {
        let mut b = BoundingBox {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        for i in pixels {
            let (x, y) = (i % width, i / width);
            b.x0 = b.x0.min(x);
            b.x1 = b.x1.max(x);
            b.y0 = b.y0.min(y);
            b.y1 = b.y1.max(y);
        }
        b
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

/// One region: sorted pixel indices, bounding box and statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    stats: RegionStats,
    pixels: Vec<u32>,
    bbox: BoundingBox,
}

impl Region {
    fn build(img: &ImageBuffer, pixels: Vec<u32>) -> Self {
        let stats = RegionStats::accumulate(img, pixels.iter().map(|&i| i as usize));
        let bbox = BoundingBox::of(img.width(), pixels.iter().map(|&i| i as usize));
        Region {
            stats,
            pixels,
            bbox,
        }
    }

    pub fn stats(&self) -> &RegionStats {
        &self.stats
    }

    /// Flat pixel indices in ascending order.
    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Axis {
    /// Boundary between rows: `R+` holds rows above `position`.
    Horizontal,
    /// Boundary between columns: `R+` holds columns left of `position`.
    Vertical,
}

/// A 2-partition of one region into `R+` and `R-`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum Cutting {
    /// Straight cut at an absolute pixel boundary index.
    Axis { axis: Axis, position: u32 },
    /// Split by the sign of the misfit gradient `mean - d_i` in one channel;
    /// pixels with a non-negative gradient go to `R+`.
    Sign { channel: usize },
    /// Explicit side assignment over the region's pixels in ascending
    /// index order, `true` meaning `R+`.
    Mask { plus: Vec<bool> },
}

/// Pixel-to-region labeling of an image grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    width: usize,
    height: usize,
    labels: Vec<RegionId>,
    regions: BTreeMap<RegionId, Region>,
    next_id: u32,
}

impl Partition {
    /// The 1-region partition of the whole grid.
    pub fn single_region(img: &ImageBuffer) -> Self {
        let pixels: Vec<u32> = (0..img.pixel_count() as u32).collect();
        let mut regions = BTreeMap::new();
        regions.insert(RegionId(0), Region::build(img, pixels));
        Partition {
            width: img.width(),
            height: img.height(),
            labels: vec![RegionId(0); img.pixel_count()],
            regions,
            next_id: 1,
        }
    }

    /// A partition from arbitrary region ids, one per pixel. Ids are kept;
    /// fresh ids start above the largest one.
    pub fn from_labels(img: &ImageBuffer, labels: &[u32]) -> Result<Self, Error> {
        if labels.len() != img.pixel_count() {
            return Err(Error::LabelLength {
                expected: img.pixel_count(),
                found: labels.len(),
            });
        }
        Ok(Self::build(
            img,
            labels.iter().map(|&l| RegionId(l)).collect(),
        ))
    }

    fn build(img: &ImageBuffer, labels: Vec<RegionId>) -> Self {
        let mut members: BTreeMap<RegionId, Vec<u32>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            members.entry(l).or_default().push(i as u32);
        }
        let next_id = members.keys().next_back().map_or(0, |l| l.0 + 1);
        let regions = members
            .into_iter()
            .map(|(id, pixels)| (id, Region::build(img, pixels)))
            .collect();
        Partition {
            width: img.width(),
            height: img.height(),
            labels,
            regions,
            next_id,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[RegionId] {
        &self.labels
    }

    pub fn label(&self, pixel: usize) -> RegionId {
        self.labels[pixel]
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn next_id(&self) -> RegionId {
        RegionId(self.next_id)
    }

    pub fn region(&self, id: RegionId) -> Result<&Region, Error> {
        self.regions.get(&id).ok_or(Error::UnknownRegion(id))
    }

    /// Regions in ascending id order.
    pub fn regions(&self) -> impl Iterator<Item = (RegionId, &Region)> {
        self.regions.iter().map(|(&id, r)| (id, r))
    }

    pub fn contains(&self, id: RegionId) -> bool {
        self.regions.contains_key(&id)
    }

    fn check_grid(&self, img: &ImageBuffer) -> Result<(), Error> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                img.width(),
                img.height(),
            ));
        }
        Ok(())
    }

    /// Side assignment of every pixel of region `id` under `cut`, in the
    /// region's pixel order (`true` = `R+`). Sides may be empty.
    pub fn cut_mask(&self, id: RegionId, cut: &Cutting, img: &ImageBuffer) -> Result<Vec<bool>, Error> {
        self.check_grid(img)?;
        let region = self.region(id)?;
        let width = self.width;
        let mask = match cut {
            Cutting::Axis { axis, position } => {
                let position = *position as usize;
                region
                    .pixels
                    .iter()
                    .map(|&i| {
                        let i = i as usize;
                        match axis {
                            Axis::Vertical => i % width < position,
                            Axis::Horizontal => i / width < position,
                        }
                    })
                    .collect()
            }
            Cutting::Sign { channel } => {
                if *channel >= img.channel_count() {
                    return Err(Error::UnknownChannel(*channel));
                }
                let mean = region.stats.mean(*channel);
                let plane = img.plane(*channel);
                region
                    .pixels
                    .iter()
                    .map(|&i| mean - plane[i as usize] >= 0.0)
                    .collect()
            }
            Cutting::Mask { plus } => {
                if plus.len() != region.len() {
                    return Err(Error::MaskLength {
                        region: id,
                        expected: region.len(),
                        found: plus.len(),
                    });
                }
                plus.clone()
            }
        };
        Ok(mask)
    }

    fn sides(&self, id: RegionId, cut: &Cutting, img: &ImageBuffer) -> Result<(Vec<u32>, Vec<u32>), Error> {
        let mask = self.cut_mask(id, cut, img)?;
        let region = &self.regions[&id];
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (&i, &side) in region.pixels.iter().zip(&mask) {
            if side {
                plus.push(i);
            } else {
                minus.push(i);
            }
        }
        if plus.is_empty() || minus.is_empty() {
            return Err(Error::EmptySide(id));
        }
        Ok((plus, minus))
    }

    /// Statistics of `R+` and `R-` without modifying the partition.
    pub fn side_stats(
        &self,
        id: RegionId,
        cut: &Cutting,
        img: &ImageBuffer,
    ) -> Result<(RegionStats, RegionStats), Error> {
        let (plus, minus) = self.sides(id, cut, img)?;
        Ok((
            RegionStats::accumulate(img, plus.iter().map(|&i| i as usize)),
            RegionStats::accumulate(img, minus.iter().map(|&i| i as usize)),
        ))
    }

    /// Splits region `id` by `cut`. The parent id is retired and `R+`
    /// receives the smaller of the two fresh ids.
    pub fn split(
        &mut self,
        id: RegionId,
        cut: &Cutting,
        img: &ImageBuffer,
    ) -> Result<(RegionId, RegionId), Error> {
        let (plus, minus) = self.sides(id, cut, img)?;
        let plus_id = RegionId(self.next_id);
        let minus_id = RegionId(self.next_id + 1);
        self.next_id += 2;
        for &i in &plus {
            self.labels[i as usize] = plus_id;
        }
        for &i in &minus {
            self.labels[i as usize] = minus_id;
        }
        self.regions.remove(&id);
        self.regions.insert(plus_id, Region::build(img, plus));
        self.regions.insert(minus_id, Region::build(img, minus));
        Ok((plus_id, minus_id))
    }

    /// Common refinement: the non-empty pairwise intersections of the
    /// regions of `self` and `other`, numbered by first appearance.
    pub fn superimpose(&self, other: &Partition, img: &ImageBuffer) -> Result<Partition, Error> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        self.check_grid(img)?;
        let mut ids: BTreeMap<(RegionId, RegionId), RegionId> = BTreeMap::new();
        let labels = self
            .labels
            .iter()
            .zip(&other.labels)
            .map(|(&a, &b)| {
                let next = RegionId(ids.len() as u32);
                *ids.entry((a, b)).or_insert(next)
            })
            .collect();
        Ok(Self::build(img, labels))
    }

    /// True if both partitions group pixels identically (ids may differ).
    pub fn same_structure(&self, other: &Partition) -> bool {
        if self.labels.len() != other.labels.len() || self.region_count() != other.region_count() {
            return false;
        }
        let mut map: BTreeMap<RegionId, RegionId> = BTreeMap::new();
        for (&a, &b) in self.labels.iter().zip(&other.labels) {
            if *map.entry(a).or_insert(b) != b {
                return false;
            }
        }
        true
    }

    /// Writes the region means of channel `k` into `out`.
    pub fn paint_channel(&self, k: usize, out: &mut [f64]) {
        for region in self.regions.values() {
            let m = region.stats.mean(k);
            for &i in &region.pixels {
                out[i as usize] = m;
            }
        }
    }

    /// The segmented image: every pixel receives its region's mean color.
    pub fn paint(&self, img: &ImageBuffer) -> Vec<Vec<f64>> {
        (0..img.channel_count())
            .map(|k| {
                let mut plane = vec![0.0; img.pixel_count()];
                self.paint_channel(k, &mut plane);
                plane
            })
            .collect()
    }

    /// J over `channels`, summed from the per-region statistics.
    pub fn misfit(&self, channels: ChannelSet) -> f64 {
        self.regions.values().map(|r| r.stats.misfit(channels)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(width: usize, height: usize, values: &[f64]) -> ImageBuffer {
        ImageBuffer::new(width, height, vec![values.to_vec()]).unwrap()
    }

    fn stats_of(values: &[f64]) -> RegionStats {
        let img = scalar(values.len(), 1, values);
        RegionStats::accumulate(&img, 0..values.len())
    }

    #[test]
    fn single_region_sums() {
        let img = scalar(2, 2, &[0.0, 0.0, 10.0, 10.0]);
        let p = Partition::single_region(&img);
        assert_eq!(p.labels(), &[RegionId(0); 4]);
        assert_eq!(p.region_count(), 1);
        let s = p.region(RegionId(0)).unwrap().stats();
        assert_eq!(s.pixel_count(), 4);
        assert_eq!(s.channel(0).sum, 20.0);
        assert_eq!(s.channel(0).sum_sq, 200.0);
    }

    #[test]
    fn means_and_misfits() {
        assert_eq!(region_mean(&stats_of(&[0.0, 0.0, 10.0, 10.0]), 0), 5.0);
        assert_eq!(region_mean(&stats_of(&[7.0; 5]), 0), 7.0);
        assert!((region_mean(&stats_of(&[0.0, 10.0, 10.0]), 0) - 20.0 / 3.0).abs() < 1e-12);

        assert_eq!(region_misfit(&stats_of(&[0.0, 0.0, 10.0, 10.0])), 50.0);
        assert_eq!(region_misfit(&stats_of(&[3.0; 6])), 0.0);
        assert!((region_misfit(&stats_of(&[0.0, 10.0, 10.0])) - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn sign_split_sends_low_values_to_plus() {
        let img = scalar(4, 1, &[0.0, 0.0, 10.0, 10.0]);
        let mut p = Partition::single_region(&img);
        let (a, b) = p.split(RegionId(0), &Cutting::Sign { channel: 0 }, &img).unwrap();
        assert_eq!((a, b), (RegionId(1), RegionId(2)));
        assert_eq!(p.region(a).unwrap().pixels(), &[0, 1]);
        assert_eq!(p.region(b).unwrap().pixels(), &[2, 3]);
        assert!(!p.contains(RegionId(0)));
        assert_eq!(p.paint(&img), vec![vec![0.0, 0.0, 10.0, 10.0]]);
    }

    #[test]
    fn vertical_axis_split() {
        let img = scalar(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut p = Partition::single_region(&img);
        let cut = Cutting::Axis {
            axis: Axis::Vertical,
            position: 1,
        };
        let (a, b) = p.split(RegionId(0), &cut, &img).unwrap();
        assert_eq!(p.region(a).unwrap().pixels(), &[0, 2]);
        assert_eq!(p.region(b).unwrap().pixels(), &[1, 3]);
        assert_eq!(
            p.region(a).unwrap().stats().pixel_count() + p.region(b).unwrap().stats().pixel_count(),
            4
        );
    }

    #[test]
    fn split_errors() {
        let img = scalar(2, 1, &[5.0, 5.0]);
        let mut p = Partition::single_region(&img);
        assert_eq!(
            p.split(RegionId(0), &Cutting::Sign { channel: 0 }, &img),
            Err(Error::EmptySide(RegionId(0)))
        );
        assert_eq!(
            p.split(RegionId(9), &Cutting::Sign { channel: 0 }, &img),
            Err(Error::UnknownRegion(RegionId(9)))
        );
        assert!(matches!(
            p.split(RegionId(0), &Cutting::Mask { plus: vec![true] }, &img),
            Err(Error::MaskLength { .. })
        ));
        let cut = Cutting::Axis {
            axis: Axis::Horizontal,
            position: 1,
        };
        assert_eq!(p.split(RegionId(0), &cut, &img), Err(Error::EmptySide(RegionId(0))));
    }

    #[test]
    fn superimposition() {
        let img = scalar(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let a = Partition::from_labels(&img, &[0, 0, 1, 1]).unwrap();
        let b = Partition::from_labels(&img, &[0, 1, 0, 1]).unwrap();
        assert_eq!(a.superimpose(&b, &img).unwrap().region_count(), 4);
        assert!(a.superimpose(&a, &img).unwrap().same_structure(&a));
        let one = Partition::single_region(&img);
        assert!(a.superimpose(&one, &img).unwrap().same_structure(&a));
        let other = scalar(2, 2, &[0.0; 4]);
        assert!(a
            .superimpose(&Partition::single_region(&other), &img)
            .is_err());
    }

    #[test]
    fn paint_identity_on_trivial_partition() {
        let img = scalar(3, 1, &[4.0, 9.0, 1.0]);
        let p = Partition::from_labels(&img, &[0, 1, 2]).unwrap();
        assert_eq!(p.paint(&img), vec![vec![4.0, 9.0, 1.0]]);
        let one = Partition::single_region(&img);
        assert_eq!(one.paint(&img), vec![vec![14.0 / 3.0; 3]]);
    }
}
