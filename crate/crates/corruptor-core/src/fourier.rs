//! 2D discrete Fourier transforms and the three frequency-domain corruptions:
//! phase scaling, constant amplitude, and high-pass filtering.
//!
//! Transforms are applied independently per RGB channel. The forward
//! transform is unnormalized (`F[u,v] = sum f[y,x] e^{-2pi i (uy/H + vx/W)}`),
//! the inverse carries the `1/(H*W)` factor, so Parseval reads
//! `sum |f|^2 = (1/(H*W)) sum |F|^2`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::imagecore::{ImageBuffer, CHANNELS, MIN_SIDE};
use crate::photometric::Severity;

/// Phase scale factor per severity level 1..=5.
pub const PHASE_ALPHA: [f64; 5] = [0.9, 0.8, 0.7, 0.6, 0.5];

/// Constant amplitude per severity level 1..=5.
pub const AMPLITUDE_BETA: [f64; 5] = [0.95, 0.9, 0.85, 0.8, 0.75];

/// High-pass diameter as a fraction of `min(H, W)` per severity level 1..=5.
pub const HIGH_PASS_D_FRACTION: [f64; 5] = [0.01, 0.02, 0.03, 0.04, 0.05];

/// Severity parameters for the three Fourier corruptions. These constants
/// are compiled in; severity-table files may repeat them but cannot change
/// them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierSeverity {
    pub level: Severity,
    pub alpha: f64,
    pub beta: f64,
    pub d_fraction: f64,
}

impl FourierSeverity {
    pub fn for_level(level: Severity) -> Self {
        let i = level.index();
        FourierSeverity {
            level,
            alpha: PHASE_ALPHA[i],
            beta: AMPLITUDE_BETA[i],
            d_fraction: HIGH_PASS_D_FRACTION[i],
        }
    }
}

/// Coefficient layout of a [`Spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumLayout {
    /// DC at (0, 0), as produced by the transform.
    Natural,
    /// DC at (H/2, W/2), low frequencies around the center.
    Centered,
}

/// Per-channel complex frequency representation of an image.
#[derive(Debug, Clone)]
pub struct Spectrum {
    height: usize,
    width: usize,
    planes: Vec<Vec<Complex64>>,
    layout: SpectrumLayout,
}

impl Spectrum {
    /// Wraps raw coefficient planes (row-major `H*W` each, one per channel).
    pub fn from_planes(
        height: usize,
        width: usize,
        planes: Vec<Vec<Complex64>>,
        layout: SpectrumLayout,
    ) -> Result<Self> {
        if height < MIN_SIDE || width < MIN_SIDE {
            return Err(Error::Domain(format!(
                "spectrum size {height}x{width} below minimum {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if planes.len() != CHANNELS || planes.iter().any(|p| p.len() != height * width) {
            return Err(Error::Shape(format!(
                "expected {CHANNELS} planes of {} coefficients",
                height * width
            )));
        }
        Ok(Spectrum { height, width, planes, layout })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn layout(&self) -> SpectrumLayout {
        self.layout
    }

    pub fn plane(&self, c: usize) -> &[Complex64] {
        &self.planes[c]
    }

    /// Coefficient at (channel, u, v) where u indexes rows.
    #[inline]
    pub fn coeff(&self, c: usize, u: usize, v: usize) -> Complex64 {
        self.planes[c][u * self.width + v]
    }

    /// `sqrt(Re^2 + Im^2)` of one coefficient.
    pub fn amplitude(&self, c: usize, u: usize, v: usize) -> f64 {
        self.coeff(c, u, v).norm()
    }

    /// Two-argument arctangent of (imaginary, real).
    pub fn phase(&self, c: usize, u: usize, v: usize) -> f64 {
        self.coeff(c, u, v).arg()
    }

    /// Same spectrum with DC moved to the center.
    pub fn centered(&self) -> Spectrum {
        match self.layout {
            SpectrumLayout::Centered => self.clone(),
            SpectrumLayout::Natural => Spectrum {
                height: self.height,
                width: self.width,
                planes: self
                    .planes
                    .iter()
                    .map(|p| shift_plane(p, self.height, self.width, false))
                    .collect(),
                layout: SpectrumLayout::Centered,
            },
        }
    }

    /// Same spectrum with DC moved back to (0, 0).
    pub fn natural(&self) -> Spectrum {
        match self.layout {
            SpectrumLayout::Natural => self.clone(),
            SpectrumLayout::Centered => Spectrum {
                height: self.height,
                width: self.width,
                planes: self
                    .planes
                    .iter()
                    .map(|p| shift_plane(p, self.height, self.width, true))
                    .collect(),
                layout: SpectrumLayout::Natural,
            },
        }
    }
}

/// Per-channel 2D DFT of an image.
pub fn forward_dft(img: &ImageBuffer) -> Spectrum {
    let (h, w) = img.dims();
    let planes = (0..CHANNELS)
        .map(|c| {
            let mut buf: Vec<Complex64> = img
                .plane(c)
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            fft_2d(&mut buf, h, w, true);
            buf
        })
        .collect();
    Spectrum { height: h, width: w, planes, layout: SpectrumLayout::Natural }
}

/// Real part of the inverse transform, clamped to `[0, 1]`.
pub fn inverse_dft(spec: &Spectrum) -> ImageBuffer {
    let natural = spec.natural();
    let (h, w) = natural.dims();
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        for z in inverse_plane(natural.plane(c), h, w) {
            data.push(z.re);
        }
    }
    ImageBuffer::from_raw_clamped(h, w, data)
}

/// Scales the phase of every coefficient by the level's alpha and
/// reconstructs the image.
pub fn phase_scaling(img: &ImageBuffer, level: Severity) -> Result<ImageBuffer> {
    phase_scaling_with_alpha(img, FourierSeverity::for_level(level).alpha)
}

/// Phase scaling with an explicit `alpha` in `(0, 1]`. `alpha = 1` is the
/// identity up to transform round-off.
pub fn phase_scaling_with_alpha(img: &ImageBuffer, alpha: f64) -> Result<ImageBuffer> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("phase scale {alpha} outside (0, 1]")));
    }
    let (h, w) = img.dims();
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let mut freq: Vec<Complex64> = img
            .plane(c)
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_2d(&mut freq, h, w, true);
        for z in &mut freq {
            *z = Complex64::from_polar(z.norm(), alpha * z.arg());
        }
        for z in inverse_plane(&freq, h, w) {
            data.push(z.re);
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Replaces every amplitude with the level's beta, keeps the phase, and
/// reconstructs. Each output channel is min-max rescaled to `[0, 1]`.
pub fn constant_amplitude(img: &ImageBuffer, level: Severity) -> Result<ImageBuffer> {
    constant_amplitude_with_beta(img, FourierSeverity::for_level(level).beta)
}

/// Constant amplitude with an explicit `beta` in `(0, 1]`.
pub fn constant_amplitude_with_beta(img: &ImageBuffer, beta: f64) -> Result<ImageBuffer> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!("amplitude constant {beta} outside (0, 1]")));
    }
    let (h, w) = img.dims();
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let mut freq: Vec<Complex64> = img
            .plane(c)
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_2d(&mut freq, h, w, true);
        for z in &mut freq {
            *z = Complex64::from_polar(beta, z.arg());
        }
        let mut plane: Vec<f64> = inverse_plane(&freq, h, w).iter().map(|z| z.re).collect();
        minmax_rescale(&mut plane);
        data.extend_from_slice(&plane);
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Zeroes every coefficient closer than `d = d_fraction * min(H, W)` to the
/// center of the centered spectrum, reconstructs, takes the absolute value,
/// and min-max rescales each channel.
pub fn high_pass(img: &ImageBuffer, level: Severity) -> Result<ImageBuffer> {
    let (h, w) = img.dims();
    let d = FourierSeverity::for_level(level).d_fraction * h.min(w) as f64;
    high_pass_with_diameter(img, d)
}

/// High-pass filter with an explicit cutoff distance `d` in spectrum cells.
/// `d = 0` removes nothing and is the identity up to round-off; a `d` beyond
/// the spectrum half-diagonal removes everything and yields all zeros.
pub fn high_pass_with_diameter(img: &ImageBuffer, d: f64) -> Result<ImageBuffer> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::Domain(format!("high-pass diameter {d} must be nonnegative")));
    }
    let (h, w) = img.dims();
    let (cy, cx) = (h / 2, w / 2);
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        let mut freq: Vec<Complex64> = img
            .plane(c)
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_2d(&mut freq, h, w, true);
        if d > 0.0 {
            let mut shifted = shift_plane(&freq, h, w, false);
            for u in 0..h {
                for v in 0..w {
                    let dy = u as f64 - cy as f64;
                    let dx = v as f64 - cx as f64;
                    if (dy * dy + dx * dx).sqrt() < d {
                        shifted[u * w + v] = Complex64::new(0.0, 0.0);
                    }
                }
            }
            freq = shift_plane(&shifted, h, w, true);
            let mut plane: Vec<f64> =
                inverse_plane(&freq, h, w).iter().map(|z| z.re.abs()).collect();
            minmax_rescale(&mut plane);
            data.extend_from_slice(&plane);
        } else {
            // Nothing removed: plain reconstruction, no rescale.
            for z in inverse_plane(&freq, h, w) {
                data.push(z.re);
            }
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place 2D FFT over a row-major `h x w` buffer. Arbitrary sizes are
/// supported. Forward is unnormalized; callers of the inverse divide by
/// `h * w` themselves (see [`inverse_plane`]).
fn fft_2d(buf: &mut [Complex64], h: usize, w: usize, forward: bool) {
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let row_fft = if forward {
            planner.plan_fft_forward(w)
        } else {
            planner.plan_fft_inverse(w)
        };
        let mut scratch = vec![Complex64::default(); row_fft.get_inplace_scratch_len()];
        for row in buf.chunks_exact_mut(w) {
            row_fft.process_with_scratch(row, &mut scratch);
        }
        let mut transposed = transpose(buf, h, w);
        let col_fft = if forward {
            planner.plan_fft_forward(h)
        } else {
            planner.plan_fft_inverse(h)
        };
        scratch.resize(col_fft.get_inplace_scratch_len(), Complex64::default());
        for col in transposed.chunks_exact_mut(h) {
            col_fft.process_with_scratch(col, &mut scratch);
        }
        let back = transpose(&transposed, w, h);
        buf.copy_from_slice(&back);
    });
}

fn inverse_plane(freq: &[Complex64], h: usize, w: usize) -> Vec<Complex64> {
    let mut buf = freq.to_vec();
    fft_2d(&mut buf, h, w, false);
    let scale = 1.0 / (h * w) as f64;
    for z in &mut buf {
        *z *= scale;
    }
    buf
}

fn transpose(m: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); m.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = m[r * cols + c];
        }
    }
    out
}

/// fftshift (`inverse = false`) or ifftshift (`inverse = true`) over both
/// axes. The pair is exact for odd sizes too.
fn shift_plane(plane: &[Complex64], h: usize, w: usize, inverse: bool) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); plane.len()];
    let (sy, sx) = (h / 2, w / 2);
    for y in 0..h {
        for x in 0..w {
            let (ty, tx) = if inverse {
                (y, x)
            } else {
                ((y + sy) % h, (x + sx) % w)
            };
            let (fy, fx) = if inverse {
                ((y + sy) % h, (x + sx) % w)
            } else {
                (y, x)
            };
            out[ty * w + tx] = plane[fy * w + fx];
        }
    }
    out
}

/// Rescales a plane to span `[0, 1]`; near-constant planes are clamped
/// instead so an all-zero plane stays all-zero.
fn minmax_rescale(plane: &mut [f64]) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in plane.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    if span > 1e-12 {
        for v in plane.iter_mut() {
            *v = (*v - lo) / span;
        }
    } else {
        for v in plane.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
}
