//! The corruption pool: uniform sampling of operation and severity,
//! routing to the pixel-domain or Fourier kernels, and deterministic
//! per-sample randomness.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fourier;
use crate::imagecore::ImageBuffer;
use crate::photometric::{
    apply_photometric, list_family, CorruptionKind, Family, Severity, SeverityTable,
};

/// One sampled corruption: a kind plus a severity level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub level: Severity,
}

impl std::fmt::Display for CorruptionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}_s{}", self.kind, self.level)
    }
}

/// Draws a kind uniformly from `pool` and a level uniformly from 1..=5,
/// independently.
pub fn sample_corruption(
    pool: &[CorruptionKind],
    rng: &mut impl Rng,
) -> Result<CorruptionSpec> {
    if pool.is_empty() {
        return Err(Error::Domain("corruption pool is empty".into()));
    }
    let kind = pool[rng.random_range(0..pool.len())];
    let level = Severity::ALL[rng.random_range(0..5)];
    Ok(CorruptionSpec { kind, level })
}

/// Applies a corruption, routing Fourier kinds to [`crate::fourier`] and
/// everything else to [`crate::photometric`]. The output has the input's
/// dimensions.
pub fn apply(
    spec: CorruptionSpec,
    img: &ImageBuffer,
    rng: &mut impl Rng,
    table: &SeverityTable,
) -> Result<ImageBuffer> {
    match spec.kind {
        CorruptionKind::PhaseScaling => fourier::phase_scaling(img, spec.level),
        CorruptionKind::ConstantAmplitude => fourier::constant_amplitude(img, spec.level),
        CorruptionKind::HighPass => fourier::high_pass(img, spec.level),
        kind => apply_photometric(kind, spec.level, img, rng, table),
    }
}

/// A named subset of the 22 corruption kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoolDescriptor {
    /// One family: weather, blur, noise, digital, or fourier.
    Family(Family),
    /// The 19 non-Fourier kinds.
    ImagenetC,
    /// All 22 kinds.
    Vc,
    /// An explicit kind list.
    Explicit(Vec<CorruptionKind>),
}

impl FromStr for PoolDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imagenet_c" => Ok(PoolDescriptor::ImagenetC),
            "vc" => Ok(PoolDescriptor::Vc),
            _ => {
                if let Ok(family) = s.parse::<Family>() {
                    return Ok(PoolDescriptor::Family(family));
                }
                let kinds: Result<Vec<CorruptionKind>> =
                    s.split(',').map(|k| k.trim().parse()).collect();
                match kinds {
                    Ok(kinds) if !kinds.is_empty() => Ok(PoolDescriptor::Explicit(kinds)),
                    _ => Err(Error::Domain(format!("unknown pool descriptor `{s}`"))),
                }
            }
        }
    }
}

impl std::fmt::Display for PoolDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PoolDescriptor::Family(fam) => f.write_str(fam.name()),
            PoolDescriptor::ImagenetC => f.write_str("imagenet_c"),
            PoolDescriptor::Vc => f.write_str("vc"),
            PoolDescriptor::Explicit(kinds) => {
                let names: Vec<_> = kinds.iter().map(|k| k.name()).collect();
                f.write_str(&names.join(","))
            }
        }
    }
}

/// Expands a descriptor into an ordered kind list.
pub fn pool_for(descriptor: &PoolDescriptor) -> Vec<CorruptionKind> {
    match descriptor {
        PoolDescriptor::Family(family) => list_family(*family).to_vec(),
        PoolDescriptor::ImagenetC => CorruptionKind::ALL
            .into_iter()
            .filter(|k| !k.is_fourier())
            .collect(),
        PoolDescriptor::Vc => CorruptionKind::ALL.to_vec(),
        PoolDescriptor::Explicit(kinds) => kinds.clone(),
    }
}

/// Deterministic derivation of per-sample random streams from a global
/// seed: distinct (epoch, sample) pairs get distinct streams, and the
/// derivation is pure so batch-parallel corruption is order-independent.
#[derive(Debug, Clone, Copy)]
pub struct SeedPolicy {
    pub global_seed: u64,
}

impl SeedPolicy {
    pub fn new(global_seed: u64) -> Self {
        SeedPolicy { global_seed }
    }

    /// 64-bit stream seed for (epoch, sample).
    pub fn stream_seed(&self, epoch: u64, sample: u64) -> u64 {
        mix(mix(mix(self.global_seed ^ 0x9E37_79B9_7F4A_7C15) ^ epoch) ^ sample)
    }

    /// Random stream for (epoch, sample).
    pub fn rng(&self, epoch: u64, sample: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.stream_seed(epoch, sample))
    }
}

/// SplitMix64 finalizer.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::rmse;

    #[test]
    fn pool_descriptors_expand_correctly() {
        assert_eq!(pool_for(&"vc".parse().unwrap()).len(), 22);
        assert_eq!(pool_for(&"imagenet_c".parse().unwrap()).len(), 19);
        assert_eq!(pool_for(&"fourier".parse().unwrap()).len(), 3);
        assert_eq!(
            pool_for(&"fog".parse().unwrap()),
            vec![CorruptionKind::Fog]
        );
        assert_eq!(
            pool_for(&"fog, contrast".parse().unwrap()).len(),
            2
        );
        assert!("fancy_pool".parse::<PoolDescriptor>().is_err());
    }

    #[test]
    fn singleton_pool_always_sampled() {
        let pool = [CorruptionKind::Contrast];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let spec = sample_corruption(&pool, &mut rng).unwrap();
            assert_eq!(spec.kind, CorruptionKind::Contrast);
        }
    }

    #[test]
    fn empty_pool_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_corruption(&[], &mut rng).is_err());
    }

    #[test]
    fn kind_frequencies_near_uniform() {
        let pool = pool_for(&PoolDescriptor::Vc);
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_101);
        let draws = 22_000;
        let mut counts = vec![0usize; pool.len()];
        let mut level_counts = [0usize; 5];
        for _ in 0..draws {
            let spec = sample_corruption(&pool, &mut rng).unwrap();
            counts[pool.iter().position(|k| *k == spec.kind).unwrap()] += 1;
            level_counts[spec.level.index()] += 1;
        }
        // Each kind within 4 binomial standard deviations of draws/22.
        let p = 1.0 / 22.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for (kind, &count) in pool.iter().zip(&counts) {
            let dev = (count as f64 - draws as f64 * p).abs();
            assert!(dev < 4.0 * sd, "{kind}: count {count} deviates {dev:.1} (> {:.1})", 4.0 * sd);
        }
        let pl = 0.2;
        let sdl = (draws as f64 * pl * (1.0 - pl)).sqrt();
        for (i, &count) in level_counts.iter().enumerate() {
            let dev = (count as f64 - draws as f64 * pl).abs();
            assert!(dev < 4.0 * sdl, "level {}: count {count} deviates", i + 1);
        }
    }

    #[test]
    fn apply_routes_fourier_kinds() {
        let img = ImageBuffer::from_fn(16, 16, |c, y, x| {
            0.1 + 0.05 * ((c + 2) as f64) * (((y * 16 + x) % 9) as f64 / 8.0)
        })
        .unwrap();
        let level = Severity::new(2).unwrap();
        let spec = CorruptionSpec { kind: CorruptionKind::PhaseScaling, level };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let via_registry = apply(spec, &img, &mut rng, SeverityTable::builtin()).unwrap();
        let direct = fourier::phase_scaling(&img, level).unwrap();
        assert_eq!(via_registry.data(), direct.data());
    }

    #[test]
    fn apply_is_deterministic_per_seed() {
        let img = ImageBuffer::from_fn(12, 12, |_, y, x| ((y + x) % 5) as f64 / 4.0).unwrap();
        let spec = CorruptionSpec {
            kind: CorruptionKind::GaussianNoise,
            level: Severity::new(2).unwrap(),
        };
        let table = SeverityTable::builtin();
        let a = apply(spec, &img, &mut ChaCha8Rng::seed_from_u64(77), table).unwrap();
        let b = apply(spec, &img, &mut ChaCha8Rng::seed_from_u64(77), table).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn high_pass_level_five_changes_224_image() {
        let img = ImageBuffer::from_fn(224, 224, |c, y, x| {
            0.5 + 0.4 * ((y as f64 / 17.0 + c as f64).sin() * (x as f64 / 11.0).cos())
        })
        .unwrap();
        let spec = CorruptionSpec {
            kind: CorruptionKind::HighPass,
            level: Severity::new(5).unwrap(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = apply(spec, &img, &mut rng, SeverityTable::builtin()).unwrap();
        assert!(out.data().iter().any(|&v| v > 0.0));
        assert!(rmse(&img, &out).unwrap() > 0.05);
        // The cutoff at this size and level.
        let d = fourier::HIGH_PASS_D_FRACTION[4] * 224.0;
        assert!((d - 11.2).abs() < 1e-9);
    }

    #[test]
    fn seed_policy_streams_are_distinct_and_pure() {
        let policy = SeedPolicy::new(42);
        assert_eq!(policy.stream_seed(3, 17), policy.stream_seed(3, 17));
        let mut seen = std::collections::HashSet::new();
        for epoch in 0..30 {
            for sample in 0..200 {
                assert!(seen.insert(policy.stream_seed(epoch, sample)));
            }
        }
    }
}
