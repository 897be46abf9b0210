//! Seeded noise fields and sampling helpers shared by the corruption
//! kernels.

use rand::Rng;

/// Smooth lattice noise in `[0, 1]`: random values on a grid with spacing
/// `cell`, blended with a smoothstep fade.
pub(crate) fn lattice_noise(h: usize, w: usize, cell: usize, rng: &mut impl Rng) -> Vec<f64> {
    let cell = cell.max(1);
    let gh = h / cell + 2;
    let gw = w / cell + 2;
    let grid: Vec<f64> = (0..gh * gw).map(|_| rng.random::<f64>()).collect();
    let mut out = vec![0.0; h * w];
    let inv = 1.0 / cell as f64;
    for y in 0..h {
        let fy = y as f64 * inv;
        let iy = fy.floor() as usize;
        let ty = fade(fy - iy as f64);
        for x in 0..w {
            let fx = x as f64 * inv;
            let ix = fx.floor() as usize;
            let tx = fade(fx - ix as f64);
            let a = grid[iy * gw + ix];
            let b = grid[iy * gw + ix + 1];
            let c = grid[(iy + 1) * gw + ix];
            let d = grid[(iy + 1) * gw + ix + 1];
            let top = a + (b - a) * tx;
            let bottom = c + (d - c) * tx;
            out[y * w + x] = top + (bottom - top) * ty;
        }
    }
    out
}

/// Multi-octave lattice noise, min-max normalized to `[0, 1]`.
pub(crate) fn fractal_noise(
    h: usize,
    w: usize,
    base_cell: usize,
    octaves: usize,
    persistence: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    let mut amp = 1.0;
    let mut cell = base_cell.max(1);
    for _ in 0..octaves {
        let layer = lattice_noise(h, w, cell, rng);
        for (o, v) in out.iter_mut().zip(layer) {
            *o += amp * v;
        }
        amp *= persistence;
        if cell == 1 {
            break;
        }
        cell /= 2;
    }
    normalize(&mut out);
    out
}

fn fade(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

pub(crate) fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn normalize(v: &mut [f64]) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v.iter() {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let span = hi - lo;
    if span > 1e-12 {
        for x in v.iter_mut() {
            *x = (*x - lo) / span;
        }
    }
}

/// Bilinear sample with clamp-to-edge coordinates.
#[inline]
pub(crate) fn bilinear(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let ty = y - y0 as f64;
    let tx = x - x0 as f64;
    let a = plane[y0 * w + x0];
    let b = plane[y0 * w + x1];
    let c = plane[y1 * w + x0];
    let d = plane[y1 * w + x1];
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

/// Separable Gaussian blur of one plane with clamp-to-edge borders.
pub(crate) fn gaussian_blur_plane(plane: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return plane.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for i in -radius..=radius {
        kernel.push((-(i * i) as f64 * inv).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }

    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sx = (x as i64 + ki as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += k * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sy = (y as i64 + ki as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += k * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fractal_noise_spans_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let field = fractal_noise(32, 32, 8, 4, 0.55, &mut rng);
        let lo = field.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn gaussian_blur_preserves_constant_plane() {
        let plane = vec![0.37; 16 * 16];
        let out = gaussian_blur_plane(&plane, 16, 16, 1.8);
        for v in out {
            assert!((v - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_interpolates_midpoints() {
        let plane = vec![0.0, 1.0, 0.0, 1.0];
        assert!((bilinear(&plane, 2, 2, 0.0, 0.5) - 0.5).abs() < 1e-12);
        assert!((bilinear(&plane, 2, 2, 0.5, 0.0) - 0.0).abs() < 1e-12);
    }
}
