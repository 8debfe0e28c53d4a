//! Exact and first-order refinement indicators.
//!
//! For a cutting of region `R` (p pixels) into `R+` (p+) and `R-` (p-):
//!
//! * the exact indicator is the misfit decrease obtained by giving each side
//!   its own mean, `dJ^k = p+ p- / (2p) * (m+^k - m-^k)^2`;
//! * the first-order indicator is `lambda^k = sum_{R+} g_i - sum_{R-} g_i`
//!   with the misfit gradient `g_i = m^k - d_i^k` taken at the region mean.
//!
//! The two are tied by `dJ^k = (lambda^k)^2 p / (8 p+ p-)`. The sign cut
//! `R+ = { g_i >= 0 }` maximizes `|lambda^k|` over every 2-partition of `R`,
//! with maximum `sum_R |g_i|`.

use crate::error::Error;
use crate::image::{ChannelSet, ImageBuffer, MAX_CHANNELS};
use crate::partition::{Cutting, Partition, RegionId, RegionStats};

/// Indicators of one cutting.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorResult {
    /// Exact indicator summed over the evaluated channels.
    pub delta_j: f64,
    /// Exact indicator per channel (zero for channels not evaluated).
    pub channel_delta_j: [f64; MAX_CHANNELS],
    /// Signed first-order indicator per channel.
    pub lambda: [f64; MAX_CHANNELS],
    pub p_plus: usize,
    pub p_minus: usize,
}

impl IndicatorResult {
    /// `(lambda^k)^2 p / (8 p+ p-)`, the exact indicator predicted from lambda.
    pub fn predicted_delta_j(&self, k: usize) -> f64 {
        delta_j_from_lambda(self.lambda[k], self.p_plus, self.p_minus)
    }
}

/// Exact indicator of channel `k` from side statistics, in mean-difference form.
pub fn channel_exact_indicator(plus: &RegionStats, minus: &RegionStats, k: usize) -> f64 {
    let pp = plus.pixel_count() as f64;
    let pm = minus.pixel_count() as f64;
    let diff = plus.mean(k) - minus.mean(k);
    pp * pm / (2.0 * (pp + pm)) * diff * diff
}

/// Exact indicator `J(c) - J(c_C)` over `channels`, from side statistics.
pub fn exact_indicator(plus: &RegionStats, minus: &RegionStats, channels: ChannelSet) -> Result<f64, Error> {
    if plus.pixel_count() == 0 || minus.pixel_count() == 0 {
        return Err(Error::EmptyCutSide);
    }
    Ok(channels
        .iter()
        .map(|k| channel_exact_indicator(plus, minus, k))
        .sum())
}

/// `lambda^2 p / (8 p+ p-)`.
pub fn delta_j_from_lambda(lambda: f64, p_plus: usize, p_minus: usize) -> f64 {
    let p = (p_plus + p_minus) as f64;
    lambda * lambda * p / (8.0 * p_plus as f64 * p_minus as f64)
}

/// Signed first-order indicator of `cut` for channel `k`, summing the misfit
/// gradient `mean - d_i` pixel by pixel. An empty side is allowed.
pub fn first_order_indicator(
    partition: &Partition,
    region: RegionId,
    cut: &Cutting,
    img: &ImageBuffer,
    k: usize,
) -> Result<f64, Error> {
    let mask = partition.cut_mask(region, cut, img)?;
    let r = partition.region(region)?;
    let mean = r.stats().mean(k);
    let plane = img.plane(k);
    let (mut plus, mut minus) = (0.0, 0.0);
    for (&i, &side) in r.pixels().iter().zip(&mask) {
        let g = mean - plane[i as usize];
        if side {
            plus += g;
        } else {
            minus += g;
        }
    }
    Ok(plus - minus)
}

/// Exact and first-order indicators of `cut` over `channels`.
pub fn evaluate_cut(
    partition: &Partition,
    region: RegionId,
    cut: &Cutting,
    img: &ImageBuffer,
    channels: ChannelSet,
) -> Result<IndicatorResult, Error> {
    let (plus, minus) = partition.side_stats(region, cut, img)?;
    let mut result = IndicatorResult {
        delta_j: 0.0,
        channel_delta_j: [0.0; MAX_CHANNELS],
        lambda: [0.0; MAX_CHANNELS],
        p_plus: plus.pixel_count(),
        p_minus: minus.pixel_count(),
    };
    for k in channels.iter() {
        let dj = channel_exact_indicator(&plus, &minus, k);
        result.channel_delta_j[k] = dj;
        result.delta_j += dj;
        result.lambda[k] = first_order_indicator(partition, region, cut, img, k)?;
    }
    Ok(result)
}

/// The sign cut of one channel and its first-order indicator.
#[derive(Clone, Debug, PartialEq)]
pub struct SignCut {
    pub cut: Cutting,
    /// `sum_R |mean - d_i|`, the largest `|lambda|` over all 2-partitions.
    pub lambda_star: f64,
    /// False when the cut would leave `R-` empty (channel constant on `R`).
    pub valid: bool,
}

/// The 2-partition of `region` by the sign of the channel-`k` gradient.
pub fn optimal_sign_cut(
    partition: &Partition,
    region: RegionId,
    img: &ImageBuffer,
    k: usize,
) -> Result<SignCut, Error> {
    if k >= img.channel_count() {
        return Err(Error::UnknownChannel(k));
    }
    let r = partition.region(region)?;
    let cut = Cutting::Sign { channel: k };
    if r.stats().is_constant(k) {
        return Ok(SignCut {
            cut,
            lambda_star: 0.0,
            valid: false,
        });
    }
    let mean = r.stats().mean(k);
    let plane = img.plane(k);
    let mut lambda_star = 0.0;
    let mut plus = 0usize;
    for &i in r.pixels() {
        let g = mean - plane[i as usize];
        lambda_star += g.abs();
        if g >= 0.0 {
            plus += 1;
        }
    }
    Ok(SignCut {
        cut,
        lambda_star,
        valid: plus > 0 && plus < r.len(),
    })
}

/// Channel with the largest `lambda_star`, first one on ties.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BestChannel {
    pub channel: usize,
    /// Every `lambda_star` is zero: the region is constant in all channels.
    pub fully_constant: bool,
}

pub fn best_channel(lambda_star: &[f64]) -> BestChannel {
    let mut channel = 0;
    for (k, &l) in lambda_star.iter().enumerate() {
        if l > lambda_star[channel] {
            channel = k;
        }
    }
    BestChannel {
        channel,
        fully_constant: lambda_star.iter().all(|&l| l == 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Axis;
    use alloc::vec;
    use alloc::vec::Vec;

    fn scalar(values: &[f64]) -> (ImageBuffer, Partition) {
        let img = ImageBuffer::new(values.len(), 1, vec![values.to_vec()]).unwrap();
        let p = Partition::single_region(&img);
        (img, p)
    }

    fn mask(bits: &[bool]) -> Cutting {
        Cutting::Mask { plus: bits.to_vec() }
    }

    #[test]
    fn exact_indicator_examples() {
        let (img, p) = scalar(&[0.0, 0.0, 10.0, 10.0]);
        let r = evaluate_cut(&p, RegionId(0), &mask(&[true, true, false, false]), &img, img.channels()).unwrap();
        assert_eq!(r.delta_j, 50.0);

        let (img, p) = scalar(&[0.0, 10.0, 10.0]);
        let r = evaluate_cut(&p, RegionId(0), &mask(&[true, false, false]), &img, img.channels()).unwrap();
        assert!((r.delta_j - 100.0 / 3.0).abs() < 1e-12);

        let (img, p) = scalar(&[4.0; 5]);
        let r = evaluate_cut(&p, RegionId(0), &mask(&[true, false, true, false, false]), &img, img.channels()).unwrap();
        assert_eq!(r.delta_j, 0.0);
        assert_eq!(r.lambda[0], 0.0);
    }

    #[test]
    fn empty_side_is_an_error() {
        let (img, p) = scalar(&[1.0, 2.0]);
        let (a, b) = (
            RegionStats::accumulate(&img, 0..2),
            RegionStats::accumulate(&img, 0..0),
        );
        assert_eq!(exact_indicator(&a, &b, img.channels()), Err(Error::EmptyCutSide));
        assert!(evaluate_cut(&p, RegionId(0), &mask(&[true, true]), &img, img.channels()).is_err());
        // lambda itself is still defined
        assert_eq!(
            first_order_indicator(&p, RegionId(0), &mask(&[true, true]), &img, 0).unwrap(),
            0.0
        );
    }

    #[test]
    fn first_order_example_and_relation() {
        let (img, p) = scalar(&[0.0, 0.0, 10.0, 10.0]);
        let cut = mask(&[true, true, false, false]);
        assert_eq!(first_order_indicator(&p, RegionId(0), &cut, &img, 0).unwrap(), 20.0);
        let r = evaluate_cut(&p, RegionId(0), &cut, &img, img.channels()).unwrap();
        assert_eq!(r.predicted_delta_j(0), 50.0);
        assert!(r.delta_j >= r.lambda[0] * r.lambda[0] / 8.0);
    }

    #[test]
    fn sign_cut_example() {
        let (img, p) = scalar(&[0.0, 0.0, 10.0, 10.0]);
        let s = optimal_sign_cut(&p, RegionId(0), &img, 0).unwrap();
        assert!(s.valid);
        assert_eq!(s.lambda_star, 20.0);
        assert_eq!(
            p.cut_mask(RegionId(0), &s.cut, &img).unwrap(),
            vec![true, true, false, false]
        );

        let (img, p) = scalar(&[3.0; 4]);
        let s = optimal_sign_cut(&p, RegionId(0), &img, 0).unwrap();
        assert_eq!((s.lambda_star, s.valid), (0.0, false));
    }

    #[test]
    fn best_channel_ties_and_constants() {
        assert_eq!(best_channel(&[20.0, 5.0, 5.0]), BestChannel { channel: 0, fully_constant: false });
        assert_eq!(best_channel(&[0.0, 0.0, 0.0]), BestChannel { channel: 0, fully_constant: true });
        assert_eq!(best_channel(&[7.0, 7.0, 3.0]).channel, 0);
        assert_eq!(best_channel(&[1.0, 7.0, 7.0]).channel, 1);
    }

    #[test]
    fn vector_indicator_is_sum_of_channels() {
        let img = ImageBuffer::new(
            4,
            1,
            vec![vec![0.0, 1.0, 7.0, 2.0], vec![9.0, 3.0, 3.0, 0.0], vec![5.0, 5.0, 1.0, 8.0]],
        )
        .unwrap();
        let p = Partition::single_region(&img);
        let cut = Cutting::Axis { axis: Axis::Vertical, position: 2 };
        let all = evaluate_cut(&p, RegionId(0), &cut, &img, img.channels()).unwrap();
        let per: Vec<f64> = (0..3)
            .map(|k| evaluate_cut(&p, RegionId(0), &cut, &img, ChannelSet::single(k)).unwrap().delta_j)
            .collect();
        assert!((all.delta_j - per.iter().sum::<f64>()).abs() < 1e-12);
    }
}
