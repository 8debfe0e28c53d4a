//! Trace, session, label and rendering exports of a segmentation state.

use std::fmt::Write as _;

use adaseg_core::image::channel_name;
use adaseg_core::{EngineConfig, ImageBuffer, Mode, Partition, SegmentationState, SplitEvent, StepRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::image_io::{encode_png, interleave, ImageIoError};

pub const TRACE_HEADER: &str = "iteration,mode,strategy,channel,region_split,n_sr,n_vr,J,tau,delta_J";

/// `value` with 9 significant digits, formatted like C's `%.9g`.
pub fn format_sig9(value: f64) -> String {
    if value == 0.0 {
        return "0".into();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{value:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{value:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Strategy column: the cutting strategy, plus the multiscalar strategy if any.
pub fn strategy_label(event: &SplitEvent) -> String {
    match event.multiscalar {
        Some(ms) => format!("{}/{}", event.cutting.name(), ms.name()),
        None => event.cutting.name().to_string(),
    }
}

/// Channel column: names of the channels whose partition changed.
pub fn channel_label(event: &SplitEvent, channel_count: usize) -> String {
    event.channels.iter().map(|k| channel_name(k, channel_count)).collect()
}

pub fn trace_row(event: &SplitEvent, channel_count: usize) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        event.iteration,
        event.mode.name(),
        strategy_label(event),
        channel_label(event, channel_count),
        event.region,
        event.n_sr,
        event.n_vr,
        format_sig9(event.j),
        format_sig9(event.tau),
        format_sig9(event.delta_j),
    )
}

/// CSV with one row per committed split.
pub fn trace_csv(state: &SegmentationState) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    let channels = state.image().channel_count();
    for event in state.events() {
        let _ = writeln!(out, "{}", trace_row(event, channels));
    }
    out
}

/// SHA-256 over the dimensions and the real-valued planes.
pub fn image_hash(img: &ImageBuffer) -> String {
    let mut hasher = Sha256::new();
    hasher.update((img.width() as u64).to_le_bytes());
    hasher.update((img.height() as u64).to_le_bytes());
    hasher.update((img.channel_count() as u64).to_le_bytes());
    for plane in img.planes() {
        for v in plane {
            hasher.update(v.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub sha256: String,
    pub width: usize,
    pub height: usize,
    pub channel_count: usize,
}

impl ImageInfo {
    pub fn of(img: &ImageBuffer) -> Self {
        ImageInfo {
            sha256: image_hash(img),
            width: img.width(),
            height: img.height(),
            channel_count: img.channel_count(),
        }
    }
}

/// Everything needed to replay a run bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionFile {
    pub version: u32,
    pub image: ImageInfo,
    pub config: EngineConfig,
    pub steps: Vec<StepRecord>,
}

impl SessionFile {
    pub const VERSION: u32 = 1;

    pub fn of(state: &SegmentationState, initial_config: EngineConfig) -> Self {
        SessionFile {
            version: Self::VERSION,
            image: ImageInfo::of(state.image()),
            config: initial_config,
            steps: state.history().to_vec(),
        }
    }

    pub fn event_count(&self) -> usize {
        self.steps.iter().map(|s| s.events.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelLayer {
    /// Channel names scored by this partition, e.g. "RGB" or "G".
    pub channels: String,
    /// Region id of every pixel, row-major.
    pub labels: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDump {
    pub iteration: usize,
    pub width: usize,
    pub height: usize,
    pub layers: Vec<LabelLayer>,
}

pub fn label_dump(state: &SegmentationState) -> LabelDump {
    let img = state.image();
    let layers = (0..state.layer_count())
        .map(|l| LabelLayer {
            channels: state
                .layer_channels(l)
                .iter()
                .map(|k| channel_name(k, img.channel_count()))
                .collect(),
            labels: state.partition(l).labels().iter().map(|id| id.0).collect(),
        })
        .collect();
    LabelDump {
        iteration: state.iteration(),
        width: img.width(),
        height: img.height(),
        layers,
    }
}

/// Segmented image as PNG.
pub fn render_segmented(state: &SegmentationState) -> Result<Vec<u8>, ImageIoError> {
    crate::image_io::encode_colors(state.image(), &state.segmented())
}

/// Input data as PNG.
pub fn render_original(img: &ImageBuffer) -> Result<Vec<u8>, ImageIoError> {
    crate::image_io::encode_colors(img, img.planes())
}

/// True for pixels whose right or lower neighbor lies in another region.
pub fn boundary_mask(partition: &Partition) -> Vec<bool> {
    let (w, h) = (partition.width(), partition.height());
    let labels = partition.labels();
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let right = x + 1 < w && labels[i + 1] != labels[i];
            let below = y + 1 < h && labels[i + w] != labels[i];
            out[i] = right || below;
        }
    }
    out
}

/// Input data with region boundaries drawn in black or white, whichever
/// contrasts more with the underlying pixel.
pub fn render_edges(state: &SegmentationState) -> Result<Vec<u8>, ImageIoError> {
    let img = state.image();
    let channels = img.channel_count();
    let mask = boundary_mask(&state.vector_partition());
    let mut samples = interleave(img.planes(), img.pixel_count());
    for (i, &edge) in mask.iter().enumerate() {
        if !edge {
            continue;
        }
        let px = &mut samples[i * channels..(i + 1) * channels];
        let mean = px.iter().map(|&v| u32::from(v)).sum::<u32>() / channels as u32;
        px.fill(if mean > 127 { 0 } else { 255 });
    }
    encode_png(img.width(), img.height(), channels, &samples)
}

/// Deterministic, well-spread RGB color for a region id.
pub fn region_color(id: u32) -> [u8; 3] {
    // splitmix64 finalizer
    let mut z = u64::from(id).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    [z as u8, (z >> 8) as u8, (z >> 16) as u8]
}

/// Every region of the vector partition in its own color, as RGB PNG.
pub fn render_labels(state: &SegmentationState) -> Result<Vec<u8>, ImageIoError> {
    let partition = state.vector_partition();
    let samples: Vec<u8> = partition.labels().iter().flat_map(|id| region_color(id.0)).collect();
    encode_png(partition.width(), partition.height(), 3, &samples)
}

/// JSON form of a split event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventView {
    pub iteration: usize,
    pub mode: String,
    pub strategy: String,
    pub channel: String,
    pub region_split: u32,
    pub cut: String,
    pub n_sr: usize,
    pub n_vr: usize,
    pub j: f64,
    pub tau: f64,
    pub delta_j: f64,
}

impl EventView {
    pub fn of(event: &SplitEvent, channel_count: usize) -> Self {
        let cut = match &event.cut {
            adaseg_core::Cutting::Axis { axis, position } => match axis {
                adaseg_core::Axis::Vertical => format!("x<{position}"),
                adaseg_core::Axis::Horizontal => format!("y<{position}"),
            },
            adaseg_core::Cutting::Sign { channel } => format!("sign({})", channel_name(*channel, channel_count)),
            adaseg_core::Cutting::Mask { plus } => {
                format!("mask({}/{})", plus.iter().filter(|&&s| s).count(), plus.len())
            }
        };
        EventView {
            iteration: event.iteration,
            mode: match event.mode {
                Mode::Vector => "vector".into(),
                Mode::Multiscalar => "multiscalar".into(),
            },
            strategy: strategy_label(event),
            channel: channel_label(event, channel_count),
            region_split: event.region.0,
            cut,
            n_sr: event.n_sr,
            n_vr: event.n_vr,
            j: event.j,
            tau: event.tau,
            delta_j: event.delta_j,
        }
    }
}

pub fn trace_json(state: &SegmentationState) -> Vec<EventView> {
    let channels = state.image().channel_count();
    state.events().map(|e| EventView::of(e, channels)).collect()
}

/// Quality curve as CSV with header `xi,probability`.
pub fn quality_csv(curve: &adaseg_core::analysis::QualityCurve) -> String {
    let mut out = String::from("xi,probability\n");
    for (xi, pr) in &curve.points {
        let _ = writeln!(out, "{},{}", format_sig9(*xi), format_sig9(*pr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_matches_printf_g() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(6.0 / 14.0), "0.428571429");
        assert_eq!(format_sig9(0.9), "0.9");
        assert_eq!(format_sig9(100.0), "100");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_sig9(0.0001), "0.0001");
        assert_eq!(format_sig9(0.00001), "1e-05");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(9.9999999999), "10");
        assert_eq!(format_sig9(999999999.7), "1e+09");
    }

    #[test]
    fn region_colors_differ() {
        let colors: std::collections::BTreeSet<[u8; 3]> = (0..1000).map(region_color).collect();
        assert!(colors.len() > 990);
    }
}
