//! Noise corruptions: shot (Poisson), impulse (salt and pepper), additive
//! Gaussian, and multiplicative speckle. All operate in the `[0, 1]` domain
//! and clamp afterwards.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::imagecore::{ImageBuffer, CHANNELS};

/// Poisson photon noise: `out = Poisson(v * photons) / photons`.
pub(crate) fn shot(img: &ImageBuffer, photons: f64, rng: &mut impl Rng) -> Result<ImageBuffer> {
    if photons <= 0.0 {
        return Err(Error::Domain(format!("photon count {photons} must be positive")));
    }
    let (h, w) = img.dims();
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        for &v in img.plane(c) {
            let lambda = v * photons;
            if lambda > 0.0 {
                let poisson = Poisson::new(lambda)
                    .map_err(|e| Error::Domain(format!("poisson({lambda}): {e}")))?;
                data.push(poisson.sample(rng) / photons);
            } else {
                data.push(0.0);
            }
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Salt-and-pepper: each pixel becomes black or white with probability
/// `rate`, all channels together.
pub(crate) fn impulse(img: &ImageBuffer, rate: f64, rng: &mut impl Rng) -> Result<ImageBuffer> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Domain(format!("impulse rate {rate} outside [0, 1]")));
    }
    let (h, w) = img.dims();
    let hw = h * w;
    let mut data = img.data().to_vec();
    for p in 0..hw {
        if rng.random::<f64>() < rate {
            let v = if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 };
            for c in 0..CHANNELS {
                data[c * hw + p] = v;
            }
        }
    }
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Additive zero-mean Gaussian noise with the given standard deviation.
pub(crate) fn gaussian(img: &ImageBuffer, sigma: f64, rng: &mut impl Rng) -> Result<ImageBuffer> {
    let normal = normal(sigma)?;
    let (h, w) = img.dims();
    let data = img
        .data()
        .iter()
        .map(|&v| v + normal.sample(rng))
        .collect();
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

/// Multiplicative noise: `out = v * (1 + N(0, sigma))`.
pub(crate) fn speckle(img: &ImageBuffer, sigma: f64, rng: &mut impl Rng) -> Result<ImageBuffer> {
    let normal = normal(sigma)?;
    let (h, w) = img.dims();
    let data = img
        .data()
        .iter()
        .map(|&v| v * (1.0 + normal.sample(rng)))
        .collect();
    Ok(ImageBuffer::from_raw_clamped(h, w, data))
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    if sigma <= 0.0 {
        return Err(Error::Domain(format!("noise sigma {sigma} must be positive")));
    }
    Normal::new(0.0, sigma).map_err(|e| Error::Domain(format!("normal(0, {sigma}): {e}")))
}
