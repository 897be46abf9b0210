//! A synthetic single-source domain-shift benchmark: three shape classes
//! (disk, triangle, cross) rendered in one source style and two held-out
//! target styles.
//!
//! Source images carry a deliberately spurious cue: the background tint
//! correlates with the class 90% of the time, while the shape geometry is
//! the only signal that survives in the target domains. Target style 1
//! renders outlines on a near-white background; target style 2 inverts the
//! source rendering. Generation is a pure function of the benchmark seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imagecore::{Dataset, ImageBuffer, LabeledSample, CHANNELS};
use crate::photometric::field::fractal_noise;
use crate::registry::mix;

/// Side length of every benchmark image.
pub const BENCH_IMAGE_SIZE: usize = 32;

const CLASSES: usize = 3;
const TRAIN_PER_CLASS: usize = 500;
const VAL_PER_CLASS: usize = 100;
const TEST_PER_CLASS: usize = 100;

/// Probability that the background tint matches the class.
const TINT_CORRELATION: f64 = 0.9;

/// Class-correlated background tints (reddish, greenish, bluish).
const PALETTE: [[f64; 3]; 3] = [
    [0.75, 0.35, 0.35],
    [0.35, 0.75, 0.35],
    [0.35, 0.45, 0.80],
];

/// The generated benchmark splits.
#[derive(Debug, Clone)]
pub struct SyntheticDGBench {
    pub train: Dataset,
    pub source_val: Dataset,
    pub target_outline: Dataset,
    pub target_inverted: Dataset,
}

/// Builds all four splits from one seed. Class balance is exact and
/// interleaved, so truncated prefixes stay balanced.
pub fn make_benchmark(seed: u64) -> SyntheticDGBench {
    let train = render_split(seed, 0, TRAIN_PER_CLASS, Style::Source, "synthetic-train");
    let source_val = render_split(seed, 1, VAL_PER_CLASS, Style::Source, "synthetic-source-val");
    let target_outline =
        render_split(seed, 2, TEST_PER_CLASS, Style::Outline, "synthetic-target-outline");
    let target_inverted =
        render_split(seed, 3, TEST_PER_CLASS, Style::Inverted, "synthetic-target-inverted");
    SyntheticDGBench { train, source_val, target_outline, target_inverted }
}

#[derive(Clone, Copy)]
enum Style {
    Source,
    Outline,
    Inverted,
}

fn render_split(seed: u64, split: u64, per_class: usize, style: Style, name: &str) -> Dataset {
    let mut samples = Vec::with_capacity(per_class * CLASSES);
    for i in 0..per_class * CLASSES {
        let class = i % CLASSES;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed ^ 0x5BE_17C4) ^ split) ^ i as u64);
        let image = match style {
            Style::Source => render_source(class, &mut rng),
            Style::Outline => render_outline(class, &mut rng),
            Style::Inverted => invert(&render_source(class, &mut rng)),
        };
        samples.push(LabeledSample { image, label: class });
    }
    Dataset::new(samples, CLASSES, name).expect("benchmark split is valid")
}

struct Geometry {
    cy: f64,
    cx: f64,
    radius: f64,
    theta: f64,
}

fn sample_geometry(rng: &mut ChaCha8Rng) -> Geometry {
    let n = BENCH_IMAGE_SIZE as f64;
    Geometry {
        cy: n / 2.0 + rng.random_range(-3.0..3.0),
        cx: n / 2.0 + rng.random_range(-3.0..3.0),
        radius: rng.random_range(7.0..11.0),
        theta: rng.random_range(0.0..std::f64::consts::TAU),
    }
}

fn render_source(class: usize, rng: &mut ChaCha8Rng) -> ImageBuffer {
    let size = BENCH_IMAGE_SIZE;
    let geo = sample_geometry(rng);

    // Spurious cue: the tint usually matches the class.
    let tint = if rng.random::<f64>() < TINT_CORRELATION {
        PALETTE[class]
    } else {
        let other = (class + 1 + rng.random_range(0..CLASSES - 1)) % CLASSES;
        PALETTE[other]
    };
    let texture = fractal_noise(size, size, 8, 3, 0.55, rng);

    // Shape fill: random color with enough luminance contrast to the tint.
    let tint_lum = luminance(&tint) * 0.85;
    let mut fill = [0.5; 3];
    for _ in 0..16 {
        for f in &mut fill {
            *f = rng.random_range(0.05..0.95);
        }
        if (luminance(&fill) - tint_lum).abs() > 0.25 {
            break;
        }
    }

    let mut data = vec![0.0; CHANNELS * size * size];
    for y in 0..size {
        for x in 0..size {
            let m = coverage(class, &geo, y, x);
            let t = texture[y * size + x];
            let jitter = rng.random_range(-0.02..0.02);
            for c in 0..CHANNELS {
                let bg = (tint[c] * (0.55 + 0.55 * t)).clamp(0.03, 0.97);
                let v = bg * (1.0 - m) + fill[c] * m + jitter;
                data[(c * size + y) * size + x] = v.clamp(0.0, 1.0);
            }
        }
    }
    ImageBuffer::from_planes(size, size, data).expect("rendered values are clamped")
}

fn render_outline(class: usize, rng: &mut ChaCha8Rng) -> ImageBuffer {
    let size = BENCH_IMAGE_SIZE;
    let geo = sample_geometry(rng);
    let bg = rng.random_range(0.88..0.96);
    let ink = rng.random_range(0.02..0.10);

    let mut inside = vec![false; size * size];
    for (idx, cell) in inside.iter_mut().enumerate() {
        let (y, x) = (idx / size, idx % size);
        *cell = contains(class, &geo, y as f64 + 0.5, x as f64 + 0.5);
    }
    // Two-pixel outline: cells adjacent to the shape boundary on either side.
    let mut data = vec![0.0; CHANNELS * size * size];
    for y in 0..size {
        for x in 0..size {
            let here = inside[y * size + x];
            let mut boundary = false;
            for (dy, dx) in [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)] {
                let ny = y as i64 + dy;
                let nx = x as i64 + dx;
                if ny < 0 || nx < 0 || ny >= size as i64 || nx >= size as i64 {
                    continue;
                }
                if inside[ny as usize * size + nx as usize] != here {
                    boundary = true;
                    break;
                }
            }
            let v = if boundary { ink } else { bg };
            for c in 0..CHANNELS {
                data[(c * size + y) * size + x] = v;
            }
        }
    }
    ImageBuffer::from_planes(size, size, data).expect("rendered values are clamped")
}

fn invert(img: &ImageBuffer) -> ImageBuffer {
    let (h, w) = img.dims();
    let data = img.data().iter().map(|&v| 1.0 - v).collect();
    ImageBuffer::from_planes(h, w, data).expect("inversion stays in range")
}

/// Fraction of a 2x2 subsample grid inside the shape.
fn coverage(class: usize, geo: &Geometry, y: usize, x: usize) -> f64 {
    let mut hits = 0;
    for sy in [0.25, 0.75] {
        for sx in [0.25, 0.75] {
            if contains(class, geo, y as f64 + sy, x as f64 + sx) {
                hits += 1;
            }
        }
    }
    hits as f64 / 4.0
}

fn contains(class: usize, geo: &Geometry, y: f64, x: f64) -> bool {
    let dy = y - geo.cy;
    let dx = x - geo.cx;
    match class {
        // Disk.
        0 => (dy * dy + dx * dx).sqrt() <= geo.radius * 0.85,
        // Equilateral triangle with circumradius `radius`, rotated by theta.
        1 => {
            let mut vertices = [(0.0, 0.0); 3];
            for (k, v) in vertices.iter_mut().enumerate() {
                let a = geo.theta + k as f64 * std::f64::consts::TAU / 3.0;
                *v = (geo.radius * a.sin(), geo.radius * a.cos());
            }
            point_in_triangle((dy, dx), vertices)
        }
        // Two crossed bars, rotated by theta.
        _ => {
            let (sin, cos) = geo.theta.sin_cos();
            let u = cos * dx + sin * dy;
            let v = -sin * dx + cos * dy;
            let half = geo.radius;
            let bar = geo.radius * 0.28;
            (u.abs() <= half && v.abs() <= bar) || (v.abs() <= half && u.abs() <= bar)
        }
    }
}

fn point_in_triangle(p: (f64, f64), v: [(f64, f64); 3]) -> bool {
    let sign = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (a.0 - c.0) * (b.1 - c.1) - (b.0 - c.0) * (a.1 - c.1)
    };
    let d1 = sign(p, v[0], v[1]);
    let d2 = sign(p, v[1], v[2]);
    let d3 = sign(p, v[2], v[0]);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

fn luminance(rgb: &[f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}
