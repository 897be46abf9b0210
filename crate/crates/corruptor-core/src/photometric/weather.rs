//! Weather corruptions: fog, snow, frost, spatter. All four composite a
//! seeded procedural field over the image.

use rand::Rng;

use crate::imagecore::{ImageBuffer, CHANNELS};
use crate::photometric::field::{bilinear, fractal_noise, smoothstep};

const FOG_TONE: f64 = 0.92;
const SNOW_TONE: f64 = 0.95;
const FROST_TINT: [f64; 3] = [0.82, 0.88, 0.96];
const MUD_TINT: [f64; 3] = [0.32, 0.22, 0.14];

/// Blends a fractal haze over the image; `intensity` in (0, 1] controls the
/// blend, `roughness` the octave falloff.
pub(crate) fn fog(
    img: &ImageBuffer,
    intensity: f64,
    roughness: f64,
    rng: &mut impl Rng,
) -> ImageBuffer {
    let (h, w) = img.dims();
    let haze = fractal_noise(h, w, h.min(w) / 2, 4, roughness, rng);
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let plane = img.plane(c);
        for (v, f) in plane.iter().zip(&haze) {
            let t = intensity * f;
            data.push(v * (1.0 - t) + t * FOG_TONE);
        }
    }
    ImageBuffer::from_raw_clamped(h, w, data)
}

/// Sparse bright flakes smeared along a random direction.
pub(crate) fn snow(
    img: &ImageBuffer,
    density: f64,
    length: usize,
    rng: &mut impl Rng,
) -> ImageBuffer {
    let (h, w) = img.dims();
    let angle = rng.random::<f64>() * std::f64::consts::PI;
    let mut flakes = vec![0.0; h * w];
    for v in &mut flakes {
        if rng.random::<f64>() < density {
            *v = 0.7 + 0.3 * rng.random::<f64>();
        }
    }
    let streaks = streak(&flakes, h, w, length.max(1), angle);
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let plane = img.plane(c);
        for (v, s) in plane.iter().zip(&streaks) {
            data.push(v * (1.0 - s) + s * SNOW_TONE);
        }
    }
    ImageBuffer::from_raw_clamped(h, w, data)
}

fn streak(plane: &[f64], h: usize, w: usize, length: usize, angle: f64) -> Vec<f64> {
    let (dy, dx) = (angle.sin(), angle.cos());
    let half = (length - 1) as f64 / 2.0;
    let gain = (length as f64 * 0.7).max(1.0);
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for t in 0..length {
                let offset = t as f64 - half;
                acc += bilinear(plane, h, w, y as f64 + dy * offset, x as f64 + dx * offset);
            }
            out[y * w + x] = (acc / length as f64 * gain).min(1.0);
        }
    }
    out
}

/// Crystalline streaks: anisotropic fractal noise thresholded into icy
/// filaments.
pub(crate) fn frost(
    img: &ImageBuffer,
    threshold: f64,
    opacity: f64,
    rng: &mut impl Rng,
) -> ImageBuffer {
    let (h, w) = img.dims();
    let angle = rng.random::<f64>() * std::f64::consts::PI;
    let (sin, cos) = angle.sin_cos();
    let base = fractal_noise(h, w, (h.min(w) / 4).max(2), 4, 0.55, rng);
    // Stretch the field 3:1 along a random axis to get filaments.
    let mut mask = vec![0.0; h * w];
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    for y in 0..h {
        for x in 0..w {
            let ry = y as f64 - cy;
            let rx = x as f64 - cx;
            let u = (cos * rx + sin * ry) * 0.33 + cx;
            let v = (-sin * rx + cos * ry) + cy;
            let n = bilinear(&base, h, w, v, u);
            mask[y * w + x] = smoothstep(threshold, threshold + 0.12, n);
        }
    }
    overlay(img, &mask, opacity, FROST_TINT)
}

/// Liquid blobs: thresholded smooth noise tinted like mud.
pub(crate) fn spatter(
    img: &ImageBuffer,
    threshold: f64,
    opacity: f64,
    rng: &mut impl Rng,
) -> ImageBuffer {
    let (h, w) = img.dims();
    let base = fractal_noise(h, w, (h.min(w) / 6).max(2), 3, 0.5, rng);
    let mask: Vec<f64> = base
        .iter()
        .map(|&n| smoothstep(threshold, threshold + 0.08, n))
        .collect();
    overlay(img, &mask, opacity, MUD_TINT)
}

fn overlay(img: &ImageBuffer, mask: &[f64], opacity: f64, tint: [f64; 3]) -> ImageBuffer {
    let (h, w) = img.dims();
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let plane = img.plane(c);
        for (v, m) in plane.iter().zip(mask) {
            let t = opacity * m;
            data.push(v * (1.0 - t) + t * tint[c]);
        }
    }
    ImageBuffer::from_raw_clamped(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn textured() -> ImageBuffer {
        ImageBuffer::from_fn(16, 16, |c, y, x| {
            0.2 + 0.6 * (((x + y * 3 + c * 5) % 11) as f64 / 10.0)
        })
        .unwrap()
    }

    #[test]
    fn fog_lightens_dark_images() {
        let dark = ImageBuffer::from_fn(16, 16, |_, _, _| 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = fog(&dark, 0.5, 0.6, &mut rng);
        let mean_in: f64 = dark.data().iter().sum::<f64>() / dark.data().len() as f64;
        let mean_out: f64 = out.data().iter().sum::<f64>() / out.data().len() as f64;
        assert!(mean_out > mean_in);
    }

    #[test]
    fn weather_kinds_are_seed_reproducible() {
        let img = textured();
        for f in [
            |i: &ImageBuffer, r: &mut ChaCha8Rng| snow(i, 0.03, 6, r),
            |i: &ImageBuffer, r: &mut ChaCha8Rng| frost(i, 0.6, 0.5, r),
            |i: &ImageBuffer, r: &mut ChaCha8Rng| spatter(i, 0.66, 0.66, r),
        ] {
            let a = f(&img, &mut ChaCha8Rng::seed_from_u64(9));
            let b = f(&img, &mut ChaCha8Rng::seed_from_u64(9));
            assert_eq!(a.data(), b.data());
        }
    }
}
