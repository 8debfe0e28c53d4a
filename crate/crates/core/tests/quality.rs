use adaseg_core::analysis::{default_xi_grid, indicator_ratio, quality_curve, quality_probability};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Draws uniform non-empty 2-partitions of `p` pixels by rejection.
fn monte_carlo(p: usize, xi: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut drawn = 0usize;
    while drawn < samples {
        let plus = (0..p).filter(|_| rng.random::<bool>()).count();
        if plus == 0 || plus == p {
            continue;
        }
        drawn += 1;
        if indicator_ratio(plus, p) >= xi {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

#[test]
fn exact_values_agree_with_sampling() {
    let n = 200_000;
    for (p, xi) in [(4, 0.9), (5, 0.9), (10, 0.8), (30, 0.95), (80, 0.9), (130, 0.99)] {
        let exact = quality_probability(p, xi).unwrap();
        let sampled = monte_carlo(p, xi, n, p as u64);
        let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!(
            (sampled - exact).abs() <= 3.0 * sigma + 1e-12,
            "p={p} xi={xi}: exact {exact}, sampled {sampled}"
        );
    }
}

#[test]
fn brute_force_enumeration_small_regions() {
    for p in 2..=14usize {
        for xi in default_xi_grid(20) {
            let mut favorable = 0u64;
            for bits in 1..(1u64 << p) - 1 {
                if indicator_ratio(bits.count_ones() as usize, p) >= xi {
                    favorable += 1;
                }
            }
            let expected = favorable as f64 / ((1u64 << p) - 2) as f64;
            assert_eq!(quality_probability(p, xi).unwrap(), expected, "p={p} xi={xi}");
        }
    }
}

#[test]
fn curve_shape() {
    let c = quality_curve(4, &[0.0, 0.75, 0.9, 1.0]).unwrap();
    assert_eq!(c.points, vec![(0.0, 1.0), (0.75, 1.0), (0.9, 6.0 / 14.0), (1.0, 6.0 / 14.0)]);
    assert!(quality_probability(81, 0.9).unwrap() >= 0.99);
}
