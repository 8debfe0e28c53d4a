//! Indicator-quality curves and synthetic test images.

pub mod quality;
pub mod synthetic;

pub use self::quality::{default_xi_grid, indicator_ratio, quality_curve, quality_probability, QualityCurve};
pub use self::synthetic::{
    generate_perturbed, generate_simple, perturbed_scene, simple_scene, Scene, PERTURBED_INCLUSIONS, SIMPLE_COLORS,
};
