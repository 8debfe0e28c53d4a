//! Flat-colored synthetic scenes: three shapes on a background, optionally
//! with a small square inclusion inside each shape.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::image::ImageBuffer;

/// Background (pink), rectangle (green), disc (yellow), triangle (blue).
pub const SIMPLE_COLORS: [[u8; 3]; 4] = [[255, 182, 193], [34, 139, 34], [255, 215, 0], [30, 60, 200]];

/// Low-contrast inclusions in the rectangle, disc and triangle.
pub const PERTURBED_INCLUSIONS: [[u8; 3]; 3] = [[80, 165, 60], [225, 185, 40], [75, 95, 225]];

/// A generated image and the class of every pixel: 0 background, 1..=3
/// shapes, 4..=6 the inclusion of shape 1..=3.
#[derive(Clone, Debug)]
pub struct Scene {
    pub image: ImageBuffer,
    pub classes: Vec<u8>,
}

impl Scene {
    /// Class of a pixel with inclusions folded into their host shape.
    pub fn shape_class(&self, pixel: usize) -> u8 {
        match self.classes[pixel] {
            c @ 4..=6 => c - 3,
            c => c,
        }
    }
}

struct Layout {
    size: f64,
    offsets: [(f64, f64); 3],
}

impl Layout {
    fn new(size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = size as f64;
        let jitter = s / 64.0;
        let mut offsets = [(0.0, 0.0); 3];
        for o in &mut offsets {
            *o = (
                libm::round(rng.random_range(-jitter..=jitter)),
                libm::round(rng.random_range(-jitter..=jitter)),
            );
        }
        Layout { size: s, offsets }
    }

    fn unit(&self, v: f64) -> f64 {
        v * self.size / 16.0
    }

    /// Which shapes contain the pixel center `(x, y)`.
    fn shapes_at(&self, x: f64, y: f64) -> [bool; 3] {
        let (rx, ry) = (x - self.offsets[0].0, y - self.offsets[0].1);
        let rect = rx >= self.unit(2.0) && rx < self.unit(7.0) && ry >= self.unit(2.0) && ry < self.unit(7.0);

        let (dx, dy) = (x - self.offsets[1].0 - self.unit(11.0), y - self.offsets[1].1 - self.unit(5.0));
        let disc = dx * dx + dy * dy <= self.unit(3.0) * self.unit(3.0);

        let (tx, ty) = (x - self.offsets[2].0, y - self.offsets[2].1);
        let (top, base) = (self.unit(9.0), self.unit(14.0));
        let half = (ty - top) / (base - top) * self.unit(4.0);
        let tri = ty >= top && ty < base && (tx - self.unit(8.0)).abs() <= half;

        [rect, disc, tri]
    }

    /// Square inclusion `(x0, y0, side)` in pixel units, one per shape.
    fn inclusions(&self) -> [(usize, usize, usize); 3] {
        let side = ((self.size / 32.0) as usize).max(2);
        let centers = [(4.5, 4.5), (11.0, 5.0), (8.0, 12.5)];
        let mut out = [(0, 0, side); 3];
        for (i, (cx, cy)) in centers.iter().enumerate() {
            let x = self.unit(*cx) + self.offsets[i].0 - side as f64 / 2.0;
            let y = self.unit(*cy) + self.offsets[i].1 - side as f64 / 2.0;
            out[i] = (libm::round(x) as usize, libm::round(y) as usize, side);
        }
        out
    }
}

fn check_distinct(colors: &[[u8; 3]]) -> Result<(), Error> {
    for (i, a) in colors.iter().enumerate() {
        if colors[i + 1..].contains(a) {
            return Err(Error::DuplicateColor);
        }
    }
    Ok(())
}

fn render(size: usize, palette: &[[u8; 3]], classes: &[u8]) -> ImageBuffer {
    let planes = (0..3)
        .map(|k| classes.iter().map(|&c| f64::from(palette[c as usize][k])).collect())
        .collect();
    ImageBuffer::new(size, size, planes).expect("valid synthetic image")
}

fn shape_classes(size: usize, layout: &Layout) -> Result<Vec<u8>, Error> {
    let mut classes = vec![0u8; size * size];
    for y in 0..size {
        for x in 0..size {
            let hits = layout.shapes_at(x as f64 + 0.5, y as f64 + 0.5);
            match hits.iter().filter(|&&h| h).count() {
                0 => {}
                1 => classes[y * size + x] = hits.iter().position(|&h| h).unwrap() as u8 + 1,
                _ => return Err(Error::OverlappingShapes),
            }
        }
    }
    Ok(classes)
}

/// Background, rectangle, disc and triangle scene with its class map.
pub fn simple_scene(size: usize, colors: &[[u8; 3]; 4], seed: u64) -> Result<Scene, Error> {
    if size < 32 {
        return Err(Error::LayoutTooSmall(size));
    }
    check_distinct(colors)?;
    let layout = Layout::new(size, seed);
    let classes = shape_classes(size, &layout)?;
    Ok(Scene {
        image: render(size, colors, &classes),
        classes,
    })
}

/// [`simple_scene`] plus one square inclusion inside each shape.
pub fn perturbed_scene(
    size: usize,
    colors: &[[u8; 3]; 4],
    inclusions: &[[u8; 3]; 3],
    seed: u64,
) -> Result<Scene, Error> {
    if size < 32 {
        return Err(Error::LayoutTooSmall(size));
    }
    let mut palette: Vec<[u8; 3]> = colors.to_vec();
    palette.extend_from_slice(inclusions);
    check_distinct(&palette)?;
    let layout = Layout::new(size, seed);
    let mut classes = shape_classes(size, &layout)?;
    for (i, (x0, y0, side)) in layout.inclusions().into_iter().enumerate() {
        let host = i as u8 + 1;
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                let pixel = y * size + x;
                if x >= size || y >= size || classes[pixel] != host {
                    return Err(Error::InclusionOutsideShape(i));
                }
                classes[pixel] = host + 3;
            }
        }
    }
    Ok(Scene {
        image: render(size, &palette, &classes),
        classes,
    })
}

/// Four flat colors: background plus three non-overlapping shapes.
pub fn generate_simple(size: usize, colors: &[[u8; 3]; 4], seed: u64) -> Result<ImageBuffer, Error> {
    simple_scene(size, colors, seed).map(|s| s.image)
}

/// Seven flat colors: the simple scene with a square inclusion in each shape.
pub fn generate_perturbed(
    size: usize,
    colors: &[[u8; 3]; 4],
    inclusions: &[[u8; 3]; 3],
    seed: u64,
) -> Result<ImageBuffer, Error> {
    perturbed_scene(size, colors, inclusions, seed).map(|s| s.image)
}
