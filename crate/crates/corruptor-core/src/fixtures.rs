//! A fixed set of synthetic reference images used by the corruption
//! contract tests and the benchmarks. Generation is deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imagecore::ImageBuffer;
use crate::photometric::Severity;

/// Ten deterministic test images at the given square size (>= 8). Pixel
/// values stay inside [0.05, 0.9] so additive corruptions have headroom in
/// both directions.
pub fn reference_images(size: usize) -> Vec<ImageBuffer> {
    let n = size as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0xF1C7_0511);
    let noise: Vec<f64> = (0..3 * size * size).map(|_| rng.random()).collect();
    let smooth: Vec<f64> = (0..3 * size * size).map(|_| rng.random()).collect();

    let shrink = |v: f64| 0.05 + 0.85 * v.clamp(0.0, 1.0);
    let mut images = Vec::with_capacity(10);

    // 1: horizontal color gradient.
    images.push(build(size, |c, _, x| {
        shrink(x as f64 / (n - 1.0) * (0.6 + 0.2 * c as f64))
    }));
    // 2: diagonal two-tone.
    images.push(build(size, |c, y, x| {
        if y + x < size {
            shrink(0.15 + 0.05 * c as f64)
        } else {
            shrink(0.8 - 0.05 * c as f64)
        }
    }));
    // 3: fine checkerboard.
    images.push(build(size, |_, y, x| {
        if (y / 2 + x / 2) % 2 == 0 {
            shrink(0.85)
        } else {
            shrink(0.15)
        }
    }));
    // 4: coarse colored checkerboard.
    images.push(build(size, |c, y, x| {
        let cell = (size / 8).max(1);
        if (y / cell + x / cell) % 2 == 0 {
            shrink(0.7 + 0.1 * (c as f64 - 1.0))
        } else {
            shrink(0.25 - 0.05 * (c as f64 - 1.0))
        }
    }));
    // 5: concentric rings.
    images.push(build(size, |c, y, x| {
        let dy = y as f64 - n / 2.0;
        let dx = x as f64 - n / 2.0;
        let r = (dy * dy + dx * dx).sqrt();
        shrink(0.5 + 0.4 * (r * 12.0 / n + c as f64).sin())
    }));
    // 6: vertical bars.
    images.push(build(size, |c, _, x| {
        let bar = (size / 6).max(1);
        if (x / bar) % 2 == (c % 2) {
            shrink(0.75)
        } else {
            shrink(0.2)
        }
    }));
    // 7: white-noise texture.
    images.push(build(size, |c, y, x| {
        shrink(noise[(c * size + y) * size + x])
    }));
    // 8: smooth random field (average of a neighborhood of noise).
    images.push(build(size, |c, y, x| {
        let mut acc = 0.0;
        let mut count = 0.0;
        for dy in 0..4 {
            for dx in 0..4 {
                let sy = (y + dy * size / 8) % size;
                let sx = (x + dx * size / 8) % size;
                acc += smooth[(c * size + sy) * size + sx];
                count += 1.0;
            }
        }
        shrink(acc / count)
    }));
    // 9: disk and bar scene.
    images.push(build(size, |c, y, x| {
        let dy = y as f64 - n * 0.38;
        let dx = x as f64 - n * 0.38;
        let in_disk = (dy * dy + dx * dx).sqrt() < n * 0.22;
        let in_bar = y > size * 2 / 3 && y < size * 5 / 6;
        if in_disk {
            shrink(0.82 - 0.1 * c as f64)
        } else if in_bar {
            shrink(0.3 + 0.15 * c as f64)
        } else {
            shrink(0.5)
        }
    }));
    // 10: crossed sinusoids.
    images.push(build(size, |c, y, x| {
        shrink(
            0.5 + 0.25 * (y as f64 * 14.0 / n + c as f64 * 0.8).sin()
                + 0.2 * (x as f64 * 9.0 / n).cos(),
        )
    }));
    images
}

/// A constant mid-gray image, handy for noise statistics.
pub fn mid_gray(size: usize) -> ImageBuffer {
    ImageBuffer::from_fn(size, size, |_, _, _| 0.5).expect("valid size")
}

fn build(size: usize, f: impl FnMut(usize, usize, usize) -> f64) -> ImageBuffer {
    ImageBuffer::from_fn(size, size, f).expect("valid size")
}

/// Convenience: all (kind, level) pairs.
pub fn all_corruptions() -> Vec<(crate::photometric::CorruptionKind, Severity)> {
    let mut out = Vec::with_capacity(22 * 5);
    for kind in crate::photometric::CorruptionKind::ALL {
        for level in Severity::ALL {
            out.push((kind, level));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic_and_in_range() {
        let a = reference_images(32);
        let b = reference_images(32);
        assert_eq!(a.len(), 10);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.data(), y.data());
        }
        for img in &a {
            assert!(img
                .data()
                .iter()
                .all(|&v| (0.05 - 1e-12..=0.9 + 1e-12).contains(&v)));
            assert!(!img.is_constant());
        }
    }
}
