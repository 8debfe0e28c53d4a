//! Real-valued channel planes.

use alloc::vec::Vec;
use core::fmt;

use crate::error::Error;

/// Largest number of channels an image may carry (RGB).
pub const MAX_CHANNELS: usize = 3;

/// A set of channel indices, stored as a bitmask over `0..MAX_CHANNELS`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ChannelSet(u8);

impl ChannelSet {
    pub const fn empty() -> Self {
        ChannelSet(0)
    }

    /// The first `count` channels.
    pub const fn first(count: usize) -> Self {
        ChannelSet(((1u16 << count) - 1) as u8)
    }

    pub const fn single(channel: usize) -> Self {
        ChannelSet(1 << channel)
    }

    pub const fn contains(self, channel: usize) -> bool {
        channel < MAX_CHANNELS && self.0 & (1 << channel) != 0
    }

    pub fn insert(&mut self, channel: usize) {
        self.0 |= 1 << channel;
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Channels in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_CHANNELS).filter(move |&k| self.contains(k))
    }

    pub const fn bits(self) -> u8 {
        self.0
    }
}

impl fmt::Debug for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Short channel name used in traces: `R`, `G`, `B` for color images and
/// `L` for the single plane of a grayscale image.
pub fn channel_name(channel: usize, channel_count: usize) -> &'static str {
    match (channel_count, channel) {
        (1, _) => "L",
        (_, 0) => "R",
        (_, 1) => "G",
        _ => "B",
    }
}

/// Fixed-size pixel grid with one or three real-valued channel planes.
///
/// Planes are row-major; the pixel at `(x, y)` has flat index `y * width + x`.
/// Values lie in `[0, 255]` and are typically lifted once from 8-bit storage.
#[derive(Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    planes: Vec<Vec<f64>>,
}

impl fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.planes.len())
            .finish()
    }
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Result<Self, Error> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage { width, height });
        }
        if planes.len() != 1 && planes.len() != 3 {
            return Err(Error::ChannelCount(planes.len()));
        }
        let expected = width * height;
        for (k, plane) in planes.iter().enumerate() {
            if plane.len() != expected {
                return Err(Error::PlaneLength {
                    plane: k,
                    expected,
                    found: plane.len(),
                });
            }
            if let Some(index) = plane
                .iter()
                .position(|v| !v.is_finite() || *v < 0.0 || *v > 255.0)
            {
                return Err(Error::ValueRange { plane: k, index });
            }
        }
        Ok(ImageBuffer {
            width,
            height,
            planes,
        })
    }

    /// Builds an image from interleaved 8-bit samples (`channels` per pixel).
    pub fn from_interleaved(
        width: usize,
        height: usize,
        channels: usize,
        data: &[u8],
    ) -> Result<Self, Error> {
        if channels != 1 && channels != 3 {
            return Err(Error::ChannelCount(channels));
        }
        if data.len() != width * height * channels {
            return Err(Error::PlaneLength {
                plane: 0,
                expected: width * height * channels,
                found: data.len(),
            });
        }
        let planes = (0..channels)
            .map(|k| {
                data.iter()
                    .skip(k)
                    .step_by(channels)
                    .map(|&v| f64::from(v))
                    .collect()
            })
            .collect();
        Self::new(width, height, planes)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn channel_count(&self) -> usize {
        self.planes.len()
    }

    pub fn channels(&self) -> ChannelSet {
        ChannelSet::first(self.planes.len())
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        &self.planes[channel]
    }

    pub fn planes(&self) -> &[Vec<f64>] {
        &self.planes
    }

    #[inline]
    pub fn value(&self, pixel: usize, channel: usize) -> f64 {
        self.planes[channel][pixel]
    }

    /// Euclidean norm of the data over all channels and pixels.
    pub fn norm(&self) -> f64 {
        let sq: f64 = self
            .planes
            .iter()
            .flat_map(|p| p.iter())
            .map(|v| v * v)
            .sum();
        libm::sqrt(sq)
    }

    /// Number of distinct colors (channel tuples).
    pub fn distinct_colors(&self) -> usize {
        let mut colors: Vec<[u64; MAX_CHANNELS]> = (0..self.pixel_count())
            .map(|i| {
                let mut c = [0u64; MAX_CHANNELS];
                for (k, plane) in self.planes.iter().enumerate() {
                    c[k] = plane[i].to_bits();
                }
                c
            })
            .collect();
        colors.sort_unstable();
        colors.dedup();
        colors.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(
            ImageBuffer::new(0, 3, vec![vec![]]),
            Err(Error::EmptyImage {
                width: 0,
                height: 3
            })
        );
        assert_eq!(
            ImageBuffer::new(1, 1, vec![vec![0.0], vec![0.0]]),
            Err(Error::ChannelCount(2))
        );
        assert!(matches!(
            ImageBuffer::new(2, 1, vec![vec![0.0]]),
            Err(Error::PlaneLength { .. })
        ));
        assert!(matches!(
            ImageBuffer::new(1, 1, vec![vec![256.0]]),
            Err(Error::ValueRange { .. })
        ));
    }

    #[test]
    fn deinterleaves() {
        let img = ImageBuffer::from_interleaved(2, 1, 3, &[255, 0, 0, 0, 0, 255]).unwrap();
        assert_eq!(img.plane(0), &[255.0, 0.0]);
        assert_eq!(img.plane(1), &[0.0, 0.0]);
        assert_eq!(img.plane(2), &[0.0, 255.0]);
        assert_eq!(img.distinct_colors(), 2);
    }

    #[test]
    fn channel_sets() {
        let all = ChannelSet::first(3);
        assert_eq!(all.len(), 3);
        assert_eq!(all.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        let g = ChannelSet::single(1);
        assert!(g.contains(1) && !g.contains(0));
    }
}
