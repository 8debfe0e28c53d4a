use adaseg::image_io::{decode_image, encode_png, load_image, quantize, save_image};
use adaseg_core::ImageBuffer;
use proptest::prelude::*;

fn rgb_png(width: u32, height: u32, samples: &[u8], color: image::ExtendedColorType) -> Vec<u8> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(samples, width, height, color)
        .unwrap();
    out
}

#[test]
fn rgba_alpha_is_dropped() {
    let png = rgb_png(2, 1, &[10, 20, 30, 0, 40, 50, 60, 255], image::ExtendedColorType::Rgba8);
    let img = decode_image(&png).unwrap();
    assert_eq!(img.channel_count(), 3);
    assert_eq!(img.plane(0), &[10.0, 40.0]);
    assert_eq!(img.plane(1), &[20.0, 50.0]);
    assert_eq!(img.plane(2), &[30.0, 60.0]);
}

#[test]
fn gray_png_is_one_channel() {
    let png = rgb_png(3, 1, &[0, 128, 255], image::ExtendedColorType::L8);
    let img = decode_image(&png).unwrap();
    assert_eq!(img.channel_count(), 1);
    assert_eq!(img.plane(0), &[0.0, 128.0, 255.0]);
}

#[test]
fn sixteen_bit_png_is_rejected() {
    let png = rgb_png(1, 1, &[1, 2], image::ExtendedColorType::L16);
    assert!(decode_image(&png).is_err());
}

#[test]
fn missing_file_is_an_error() {
    assert!(load_image(std::path::Path::new("/nonexistent/x.png")).is_err());
}

#[test]
fn saved_values_are_quantized() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.png");
    let img = ImageBuffer::new(4, 1, vec![vec![0.0; 4]]).unwrap();
    save_image(&img, &[vec![127.5, -0.3, 255.9, 42.0]], &path).unwrap();
    let back = load_image(&path).unwrap();
    assert_eq!(back.plane(0), &[128.0, 0.0, 255.0, 42.0]);
}

#[test]
fn unsupported_channel_count_is_rejected() {
    assert!(encode_png(1, 1, 2, &[0, 0]).is_err());
}

proptest! {
    #[test]
    fn load_save_load_is_identity(
        (w, h, gray, bytes) in (1usize..12, 1usize..12, any::<bool>())
            .prop_flat_map(|(w, h, gray)| {
                let n = w * h * if gray { 1 } else { 3 };
                (Just(w), Just(h), Just(gray), prop::collection::vec(any::<u8>(), n))
            })
    ) {
        let channels = if gray { 1 } else { 3 };
        let img = ImageBuffer::from_interleaved(w, h, channels, &bytes).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        save_image(&img, img.planes(), &path).unwrap();
        let back = load_image(&path).unwrap();
        prop_assert_eq!(&back, &img);
        save_image(&back, back.planes(), &path).unwrap();
        prop_assert_eq!(load_image(&path).unwrap(), img);
    }

    #[test]
    fn quantization_error_is_at_most_half(v in 0.0f64..=255.0) {
        prop_assert!((f64::from(quantize(v)) - v).abs() <= 0.5);
    }
}
