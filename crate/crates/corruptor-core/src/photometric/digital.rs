//! Digital corruptions: JPEG re-encoding, pixelation, elastic warp,
//! saturation, brightness, contrast.

use rand::Rng;

use crate::error::{Error, Result};
use crate::imagecore::{quantize, ImageBuffer, CHANNELS};
use crate::photometric::field::{bilinear, gaussian_blur_plane};

/// Round-trips the image through a real JPEG encode/decode at the given
/// quality. This is the one kind that quantizes to 8 bits internally.
pub(crate) fn jpeg(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Domain(format!("jpeg quality {quality} outside 1..=100")));
    }
    let (h, w) = img.dims();
    let mut raw = vec![0u8; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                raw[(y * w + x) * 3 + c] = quantize(img.get(c, y, x));
            }
        }
    }
    let rgb = image::RgbImage::from_raw(w as u32, h as u32, raw)
        .expect("buffer length matches dimensions");
    let mut encoded = Vec::new();
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut encoded, quality)
        .encode_image(&rgb)
        .map_err(|e| Error::Domain(format!("jpeg encode: {e}")))?;
    let decoded = image::load_from_memory_with_format(&encoded, image::ImageFormat::Jpeg)
        .map_err(|e| Error::Domain(format!("jpeg decode: {e}")))?
        .to_rgb8();
    let out = decoded.as_raw();
    let mut data = vec![0.0; CHANNELS * h * w];
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                data[(c * h + y) * w + x] = out[(y * w + x) * 3 + c] as f64 / 255.0;
            }
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Box-downscales to `scale` times the original size (at least 2x2) and
/// upscales back with nearest neighbor.
pub(crate) fn pixelate(img: &ImageBuffer, scale: f64) -> Result<ImageBuffer> {
    if !(scale > 0.0 && scale < 1.0) {
        return Err(Error::Domain(format!("pixelate scale {scale} outside (0, 1)")));
    }
    let (h, w) = img.dims();
    let th = ((h as f64 * scale).round() as usize).clamp(2, h);
    let tw = ((w as f64 * scale).round() as usize).clamp(2, w);
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let plane = img.plane(c);
        let mut sums = vec![0.0; th * tw];
        let mut counts = vec![0usize; th * tw];
        for y in 0..h {
            let ty = y * th / h;
            for x in 0..w {
                let tx = x * tw / w;
                sums[ty * tw + tx] += plane[y * w + x];
                counts[ty * tw + tx] += 1;
            }
        }
        for (s, n) in sums.iter_mut().zip(&counts) {
            *s /= (*n).max(1) as f64;
        }
        for y in 0..h {
            let ty = y * th / h;
            for x in 0..w {
                let tx = x * tw / w;
                data.push(sums[ty * tw + tx]);
            }
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Warps the image along a seeded smooth displacement field whose peak
/// magnitude is `magnitude` pixels.
pub(crate) fn elastic(
    img: &ImageBuffer,
    magnitude: f64,
    smoothness: f64,
    rng: &mut impl Rng,
) -> Result<ImageBuffer> {
    if magnitude <= 0.0 || smoothness <= 0.0 {
        return Err(Error::Domain(format!(
            "elastic needs positive magnitude and smoothness, got {magnitude}/{smoothness}"
        )));
    }
    let (h, w) = img.dims();
    let dy = displacement_field(h, w, magnitude, smoothness, rng);
    let dx = displacement_field(h, w, magnitude, smoothness, rng);
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let plane = img.plane(c);
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                data.push(bilinear(plane, h, w, y as f64 + dy[p], x as f64 + dx[p]));
            }
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

fn displacement_field(
    h: usize,
    w: usize,
    magnitude: f64,
    smoothness: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let raw: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let mut smooth = gaussian_blur_plane(&raw, h, w, smoothness);
    let peak = smooth.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1e-12 {
        for v in &mut smooth {
            *v *= magnitude / peak;
        }
    }
    smooth
}

/// Scales the distance from per-pixel luminance by `factor`.
pub(crate) fn saturate(img: &ImageBuffer, factor: f64) -> ImageBuffer {
    let (h, w) = img.dims();
    let hw = h * w;
    let mut data = vec![0.0; CHANNELS * hw];
    for p in 0..hw {
        let r = img.data()[p];
        let g = img.data()[hw + p];
        let b = img.data()[2 * hw + p];
        let lum = 0.299 * r + 0.587 * g + 0.114 * b;
        data[p] = lum + factor * (r - lum);
        data[hw + p] = lum + factor * (g - lum);
        data[2 * hw + p] = lum + factor * (b - lum);
    }
    ImageBuffer::from_raw_clamped(h, w, data)
}

/// Adds `delta` to every value.
pub(crate) fn brightness(img: &ImageBuffer, delta: f64) -> ImageBuffer {
    let (h, w) = img.dims();
    let data = img.data().iter().map(|&v| v + delta).collect();
    ImageBuffer::from_raw_clamped(h, w, data)
}

/// Centered contrast: `out = 0.5 + c * (v - 0.5)`; `c = 1` is the identity.
pub(crate) fn contrast(img: &ImageBuffer, coefficient: f64) -> ImageBuffer {
    let (h, w) = img.dims();
    let data = img
        .data()
        .iter()
        .map(|&v| 0.5 + coefficient * (v - 0.5))
        .collect();
    ImageBuffer::from_raw_clamped(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gradient() -> ImageBuffer {
        ImageBuffer::from_fn(16, 16, |c, y, x| {
            (x as f64 / 15.0) * 0.6 + (y as f64 / 15.0) * 0.3 + c as f64 * 0.02
        })
        .unwrap()
    }

    #[test]
    fn unit_contrast_is_identity() {
        let img = gradient();
        let out = contrast(&img, 1.0);
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn brightness_saturates_white() {
        let white = ImageBuffer::from_fn(8, 8, |_, _, _| 1.0).unwrap();
        let out = brightness(&white, 0.3);
        assert!(out.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn jpeg_preserves_dimensions() {
        let img = gradient();
        let out = jpeg(&img, 18).unwrap();
        assert_eq!(out.dims(), img.dims());
        assert!(!out.is_constant());
    }

    #[test]
    fn pixelate_constant_blocks() {
        let img = gradient();
        let out = pixelate(&img, 0.25).unwrap();
        // 16 * 0.25 = 4 blocks of 4x4 constant pixels.
        assert_eq!(out.get(0, 0, 0), out.get(0, 3, 3));
        assert_ne!(out.get(0, 0, 0), out.get(0, 0, 12));
    }

    #[test]
    fn pixelate_never_collapses_below_2x2() {
        let img = ImageBuffer::from_fn(8, 8, |_, y, x| ((y * 8 + x) % 7) as f64 / 7.0).unwrap();
        let out = pixelate(&img, 0.05).unwrap();
        assert!(!out.is_constant());
    }

    #[test]
    fn elastic_is_seeded() {
        let img = gradient();
        let a = elastic(&img, 2.5, 4.0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = elastic(&img, 2.5, 4.0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn saturate_pushes_away_from_gray() {
        let img = ImageBuffer::from_fn(8, 8, |c, _, _| match c {
            0 => 0.6,
            1 => 0.4,
            _ => 0.5,
        })
        .unwrap();
        let out = saturate(&img, 2.0);
        assert!(out.get(0, 0, 0) > 0.6);
        assert!(out.get(1, 0, 0) < 0.4);
    }
}
