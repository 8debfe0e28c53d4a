//! How well the first-order indicator ranks cuttings inside one region.
//!
//! For a cut of a p-pixel region into p+ and p- pixels,
//! `(lambda^2 / 2p) / dJ = 4 p+ p- / p^2`, which never exceeds one. With
//! every non-empty ordered 2-partition of the region equally likely, the
//! probability that this ratio is at least `xi` is a binomial sum over p+.

use alloc::vec::Vec;

use crate::error::Error;

/// Points `(xi, Pr{xi <= ratio <= 1})` for one region size.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityCurve {
    pub p: usize,
    pub points: Vec<(f64, f64)>,
}

/// `4 p+ (p - p+) / p^2`, the ratio of `lambda^2 / 2p` to the exact indicator.
pub fn indicator_ratio(p_plus: usize, p: usize) -> f64 {
    let (pp, pm) = (p_plus as f64, (p - p_plus) as f64);
    4.0 * pp * pm / (p as f64 * p as f64)
}

/// Region sizes up to this bound are summed exactly in integers.
const EXACT_LIMIT: usize = 120;

/// Probability that a uniformly drawn non-empty 2-partition of a p-pixel
/// region has indicator ratio at least `xi`.
pub fn quality_probability(p: usize, xi: f64) -> Result<f64, Error> {
    if p < 2 {
        return Err(Error::RegionTooSmall(p));
    }
    if p <= EXACT_LIMIT {
        let mut binom: u128 = 1; // C(p, 0)
        let mut favorable: u128 = 0;
        for k in 1..p {
            binom = binom * (p - k + 1) as u128 / k as u128;
            if indicator_ratio(k, p) >= xi {
                favorable += binom;
            }
        }
        let total = (1u128 << p) - 2;
        return Ok(favorable as f64 / total as f64);
    }

    let ln_fact_p = libm::lgamma(p as f64 + 1.0);
    let terms: Vec<f64> = (1..p)
        .filter(|&k| indicator_ratio(k, p) >= xi)
        .map(|k| ln_fact_p - libm::lgamma(k as f64 + 1.0) - libm::lgamma((p - k) as f64 + 1.0))
        .collect();
    let Some(max) = terms.iter().copied().reduce(f64::max) else {
        return Ok(0.0);
    };
    let sum: f64 = terms.iter().map(|t| libm::exp(t - max)).sum();
    let ln_total = p as f64 * core::f64::consts::LN_2 + libm::log1p(-libm::exp2(1.0 - p as f64));
    Ok(libm::exp(max + libm::log(sum) - ln_total).min(1.0))
}

/// The curve over `xi_grid` for a region of `p` pixels.
pub fn quality_curve(p: usize, xi_grid: &[f64]) -> Result<QualityCurve, Error> {
    let points = xi_grid
        .iter()
        .map(|&xi| quality_probability(p, xi).map(|pr| (xi, pr)))
        .collect::<Result<_, _>>()?;
    Ok(QualityCurve { p, points })
}

/// `steps + 1` evenly spaced values from 0 to 1.
pub fn default_xi_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}
