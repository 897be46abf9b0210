//! The 19 pixel-domain corruptions, grouped as Weather, Blur, Noise and
//! Digital, each with 5 severity levels parameterized by a
//! [`SeverityTable`]. The three Fourier corruptions live in
//! [`crate::fourier`]; this module only names them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::imagecore::ImageBuffer;

mod blur;
mod digital;
pub(crate) mod field;
mod noise;
mod severity;
mod weather;

pub use severity::SeverityTable;

/// Corruption severity, an integer in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Severity(u8);

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity(1),
        Severity(2),
        Severity(3),
        Severity(4),
        Severity(5),
    ];

    pub fn new(level: u8) -> Result<Self> {
        if (1..=5).contains(&level) {
            Ok(Severity(level))
        } else {
            Err(Error::Domain(format!("severity level {level} outside 1..=5")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based index into per-level tables.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let level: u8 = s
            .parse()
            .map_err(|_| Error::Domain(format!("severity `{s}` is not an integer")))?;
        Severity::new(level)
    }
}

/// One corruption family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Weather,
    Blur,
    Noise,
    Digital,
    Fourier,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Weather,
        Family::Blur,
        Family::Noise,
        Family::Digital,
        Family::Fourier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Weather => "weather",
            Family::Blur => "blur",
            Family::Noise => "noise",
            Family::Digital => "digital",
            Family::Fourier => "fourier",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown corruption family `{s}`")))
    }
}

macro_rules! corruption_kinds {
    ($(($variant:ident, $name:literal, $family:ident, $deterministic:literal)),+ $(,)?) => {
        /// One of the 22 corruption kinds.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum CorruptionKind {
            $($variant,)+
        }

        impl CorruptionKind {
            pub const ALL: [CorruptionKind; 22] = [$(CorruptionKind::$variant,)+];

            pub fn name(self) -> &'static str {
                match self {
                    $(CorruptionKind::$variant => $name,)+
                }
            }

            pub fn family(self) -> Family {
                match self {
                    $(CorruptionKind::$variant => Family::$family,)+
                }
            }

            /// True for kinds whose output depends only on input and level.
            pub fn is_deterministic(self) -> bool {
                match self {
                    $(CorruptionKind::$variant => $deterministic,)+
                }
            }
        }

        impl FromStr for CorruptionKind {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(CorruptionKind::$variant),)+
                    _ => Err(Error::Domain(format!("unknown corruption kind `{s}`"))),
                }
            }
        }
    };
}

corruption_kinds![
    (Fog, "fog", Weather, false),
    (Snow, "snow", Weather, false),
    (Frost, "frost", Weather, false),
    (Spatter, "spatter", Weather, false),
    (GaussianBlur, "gaussian_blur", Blur, true),
    (GlassBlur, "glass_blur", Blur, false),
    (MotionBlur, "motion_blur", Blur, false),
    (DefocusBlur, "defocus_blur", Blur, true),
    (ZoomBlur, "zoom_blur", Blur, true),
    (ShotNoise, "shot_noise", Noise, false),
    (ImpulseNoise, "impulse_noise", Noise, false),
    (GaussianNoise, "gaussian_noise", Noise, false),
    (SpeckleNoise, "speckle_noise", Noise, false),
    (JpegCompression, "jpeg_compression", Digital, true),
    (Pixelate, "pixelate", Digital, true),
    (Elastic, "elastic", Digital, false),
    (Saturate, "saturate", Digital, true),
    (Brightness, "brightness", Digital, true),
    (Contrast, "contrast", Digital, true),
    (PhaseScaling, "phase_scaling", Fourier, true),
    (ConstantAmplitude, "constant_amplitude", Fourier, true),
    (HighPass, "high_pass", Fourier, true),
];

impl CorruptionKind {
    pub fn is_fourier(self) -> bool {
        self.family() == Family::Fourier
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered membership of one family.
pub fn list_family(family: Family) -> &'static [CorruptionKind] {
    use CorruptionKind::*;
    match family {
        Family::Weather => &[Fog, Snow, Frost, Spatter],
        Family::Blur => &[GaussianBlur, GlassBlur, MotionBlur, DefocusBlur, ZoomBlur],
        Family::Noise => &[ShotNoise, ImpulseNoise, GaussianNoise, SpeckleNoise],
        Family::Digital => &[
            JpegCompression,
            Pixelate,
            Elastic,
            Saturate,
            Brightness,
            Contrast,
        ],
        Family::Fourier => &[PhaseScaling, ConstantAmplitude, HighPass],
    }
}

/// Applies a non-Fourier corruption at the given severity. Stochastic kinds
/// draw from `rng`; deterministic kinds ignore it.
pub fn apply_photometric(
    kind: CorruptionKind,
    level: Severity,
    img: &ImageBuffer,
    rng: &mut impl Rng,
    table: &SeverityTable,
) -> Result<ImageBuffer> {
    if kind.is_fourier() {
        return Err(Error::Domain(format!(
            "{kind} is a Fourier corruption; route it through the fourier module"
        )));
    }
    use CorruptionKind::*;
    let out = match kind {
        Fog => weather::fog(
            img,
            table.param(kind, level, "intensity")?,
            table.param(kind, level, "roughness")?,
            rng,
        ),
        Snow => weather::snow(
            img,
            table.param(kind, level, "density")?,
            table.param(kind, level, "length")?.round() as usize,
            rng,
        ),
        Frost => weather::frost(
            img,
            table.param(kind, level, "threshold")?,
            table.param(kind, level, "opacity")?,
            rng,
        ),
        Spatter => weather::spatter(
            img,
            table.param(kind, level, "threshold")?,
            table.param(kind, level, "opacity")?,
            rng,
        ),
        GaussianBlur => blur::gaussian(img, table.param(kind, level, "sigma")?)?,
        GlassBlur => blur::glass(
            img,
            table.param(kind, level, "radius")?.round() as i64,
            table.param(kind, level, "iterations")?.round() as usize,
            rng,
        ),
        MotionBlur => blur::motion(img, table.param(kind, level, "length")?.round() as usize, rng)?,
        DefocusBlur => blur::defocus(img, table.param(kind, level, "radius")?)?,
        ZoomBlur => blur::zoom(
            img,
            table.param(kind, level, "max_zoom")?,
            table.param(kind, level, "steps")?.round() as usize,
        )?,
        ShotNoise => noise::shot(img, table.param(kind, level, "photons")?, rng)?,
        ImpulseNoise => noise::impulse(img, table.param(kind, level, "rate")?, rng)?,
        GaussianNoise => noise::gaussian(img, table.param(kind, level, "sigma")?, rng)?,
        SpeckleNoise => noise::speckle(img, table.param(kind, level, "sigma")?, rng)?,
        JpegCompression => digital::jpeg(img, table.param(kind, level, "quality")?.round() as u8)?,
        Pixelate => digital::pixelate(img, table.param(kind, level, "scale")?)?,
        Elastic => digital::elastic(
            img,
            table.param(kind, level, "magnitude")?,
            table.param(kind, level, "smoothness")?,
            rng,
        )?,
        Saturate => digital::saturate(img, table.param(kind, level, "factor")?),
        Brightness => digital::brightness(img, table.param(kind, level, "delta")?),
        Contrast => digital::contrast(img, table.param(kind, level, "coefficient")?),
        PhaseScaling | ConstantAmplitude | HighPass => unreachable!(),
    };
    Ok(out)
}
