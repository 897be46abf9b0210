//! Blur corruptions: gaussian, glass, motion, defocus, zoom.

use rand::Rng;

use crate::error::{Error, Result};
use crate::imagecore::{ImageBuffer, CHANNELS};
use crate::photometric::field::{bilinear, gaussian_blur_plane};

pub(crate) fn gaussian(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    if sigma <= 0.0 {
        return Err(Error::Domain(format!("blur sigma {sigma} must be positive")));
    }
    let (h, w) = img.dims();
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        data.extend(gaussian_blur_plane(img.plane(c), h, w, sigma));
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Displaces every pixel by a random offset within `radius`, `iterations`
/// times, then applies a mild smoothing pass.
pub(crate) fn glass(
    img: &ImageBuffer,
    radius: i64,
    iterations: usize,
    rng: &mut impl Rng,
) -> ImageBuffer {
    let (h, w) = img.dims();
    let radius = radius.max(1);
    let mut planes: Vec<Vec<f64>> = (0..CHANNELS).map(|c| img.plane(c).to_vec()).collect();
    for _ in 0..iterations.max(1) {
        let mut offsets = Vec::with_capacity(h * w);
        for _ in 0..h * w {
            offsets.push((
                rng.random_range(-radius..=radius),
                rng.random_range(-radius..=radius),
            ));
        }
        for plane in &mut planes {
            let src = plane.clone();
            for y in 0..h {
                for x in 0..w {
                    let (dy, dx) = offsets[y * w + x];
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    plane[y * w + x] = src[sy * w + sx];
                }
            }
        }
    }
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for plane in planes {
        data.extend(gaussian_blur_plane(&plane, h, w, 0.5));
    }
    ImageBuffer::from_raw_clamped(h, w, data)
}

/// Averages `length` samples along a random direction.
pub(crate) fn motion(img: &ImageBuffer, length: usize, rng: &mut impl Rng) -> Result<ImageBuffer> {
    if length < 2 {
        return Err(Error::Domain(format!("motion length {length} must be at least 2")));
    }
    let (h, w) = img.dims();
    let angle = rng.random::<f64>() * std::f64::consts::PI;
    let (dy, dx) = (angle.sin(), angle.cos());
    let half = (length - 1) as f64 / 2.0;
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let plane = img.plane(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for t in 0..length {
                    let o = t as f64 - half;
                    acc += bilinear(plane, h, w, y as f64 + dy * o, x as f64 + dx * o);
                }
                data.push(acc / length as f64);
            }
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Convolves with a normalized disk of the given radius.
pub(crate) fn defocus(img: &ImageBuffer, radius: f64) -> Result<ImageBuffer> {
    if radius <= 0.0 {
        return Err(Error::Domain(format!("defocus radius {radius} must be positive")));
    }
    let r = radius.ceil() as i64;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dy * dy + dx * dx) as f64).sqrt() <= radius {
                offsets.push((dy, dx));
            }
        }
    }
    let weight = 1.0 / offsets.len() as f64;
    let (h, w) = img.dims();
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let plane = img.plane(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for &(dy, dx) in &offsets {
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    acc += plane[sy * w + sx];
                }
                data.push(acc * weight);
            }
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Averages `steps` progressively center-zoomed copies up to `max_zoom`.
pub(crate) fn zoom(img: &ImageBuffer, max_zoom: f64, steps: usize) -> Result<ImageBuffer> {
    if max_zoom <= 1.0 || steps < 2 {
        return Err(Error::Domain(format!(
            "zoom blur needs max_zoom > 1 and steps >= 2, got {max_zoom}/{steps}"
        )));
    }
    let (h, w) = img.dims();
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let plane = img.plane(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for i in 0..steps {
                    let z = 1.0 + (max_zoom - 1.0) * i as f64 / (steps - 1) as f64;
                    let sy = cy + (y as f64 - cy) / z;
                    let sx = cx + (x as f64 - cx) / z;
                    acc += bilinear(plane, h, w, sy, sx);
                }
                data.push(acc / steps as f64);
            }
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::rmse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn checker() -> ImageBuffer {
        ImageBuffer::from_fn(16, 16, |_, y, x| if (y / 2 + x / 2) % 2 == 0 { 0.9 } else { 0.1 })
            .unwrap()
    }

    #[test]
    fn gaussian_reduces_contrast_monotonically() {
        let img = checker();
        let soft = gaussian(&img, 0.8).unwrap();
        let softer = gaussian(&img, 2.0).unwrap();
        assert!(rmse(&img, &softer).unwrap() > rmse(&img, &soft).unwrap());
    }

    #[test]
    fn zoom_keeps_center_pixel_close() {
        let img = ImageBuffer::from_fn(17, 17, |_, y, x| {
            if y == 8 && x == 8 {
                1.0
            } else {
                0.2
            }
        })
        .unwrap();
        let out = zoom(&img, 1.2, 6).unwrap();
        assert!(out.get(0, 8, 8) > 0.9);
    }

    #[test]
    fn glass_preserves_value_range() {
        let img = checker();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = glass(&img, 2, 3, &mut rng);
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(!out.is_constant());
    }

    #[test]
    fn motion_direction_is_seeded() {
        let img = checker();
        let a = motion(&img, 7, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = motion(&img, 7, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let c = motion(&img, 7, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), c.data());
    }
}
