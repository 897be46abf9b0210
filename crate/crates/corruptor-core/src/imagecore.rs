//! Image representation, pixel-format conversion, file IO, and distance
//! metrics shared by every other module.
//!
//! Pixels live in `[0, 1]` as `f64` planes; all corruption math happens in
//! this domain and quantization to 8-bit occurs only at the file boundary.

use std::path::Path;

use crate::error::{Error, Result};

/// Number of color channels in every buffer.
pub const CHANNELS: usize = 3;

/// Smallest supported image side. Every corruption kernel is defined from
/// this size upward (two rounds of 2x2 pooling and all blur kernels fit).
pub const MIN_SIDE: usize = 8;

/// An H x W x 3 image with real-valued pixels in `[0, 1]`.
///
/// Data is stored channel-planar: plane `c` is a row-major `H*W` slice.
/// Buffers are immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    /// All-black image of the given size.
    pub fn new(height: usize, width: usize) -> Result<Self> {
        check_dims(height, width)?;
        Ok(ImageBuffer {
            height,
            width,
            data: vec![0.0; CHANNELS * height * width],
        })
    }

    /// Builds an image by evaluating `f(channel, y, x)`; values are clamped
    /// to `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(height, width)?;
        let mut data = Vec::with_capacity(CHANNELS * height * width);
        for c in 0..CHANNELS {
            for y in 0..height {
                for x in 0..width {
                    data.push(clamp01(f(c, y, x)));
                }
            }
        }
        Ok(ImageBuffer { height, width, data })
    }

    /// Wraps channel-planar data. Every value must be finite and in `[0, 1]`.
    pub fn from_planes(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != CHANNELS * height * width {
            return Err(Error::Shape(format!(
                "expected {} values for a {}x{} image, got {}",
                CHANNELS * height * width,
                height,
                width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Domain(format!(
                "pixel value {v} outside [0, 1]"
            )));
        }
        Ok(ImageBuffer { height, width, data })
    }

    /// Same as [`from_planes`](Self::from_planes) but clamps instead of
    /// rejecting. Kernels that already validated their source image use this
    /// to re-enter the `[0, 1]` domain after arithmetic.
    pub(crate) fn from_raw_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), CHANNELS * height * width);
        for v in &mut data {
            *v = clamp01(*v);
        }
        ImageBuffer { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// (height, width) pair.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Pixel value at (channel, y, x).
    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Row-major plane for one channel.
    #[inline]
    pub fn plane(&self, c: usize) -> &[f64] {
        let hw = self.height * self.width;
        &self.data[c * hw..(c + 1) * hw]
    }

    /// All three planes, concatenated channel-major.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// True if every pixel of every channel equals the first one.
    pub fn is_constant(&self) -> bool {
        let first = self.data[0];
        self.data.iter().all(|&v| v == first)
    }
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(Error::Domain(format!(
            "image size {height}x{width} below minimum {MIN_SIDE}x{MIN_SIDE}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        return 0.0;
    }
    v.clamp(0.0, 1.0)
}

/// Loads an 8-bit RGB raster (PNG or JPEG). Each 8-bit value `v` maps to
/// `v / 255` exactly; grayscale inputs are replicated to 3 channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|e| Error::read(path, e))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    if h < MIN_SIDE || w < MIN_SIDE {
        return Err(Error::read(
            path,
            format!("image {h}x{w} below minimum {MIN_SIDE}x{MIN_SIDE}"),
        ));
    }
    let raw = rgb.as_raw();
    let mut data = vec![0.0; CHANNELS * h * w];
    for y in 0..h {
        for x in 0..w {
            let px = (y * w + x) * 3;
            for c in 0..CHANNELS {
                data[(c * h + y) * w + x] = raw[px + c] as f64 / 255.0;
            }
        }
    }
    Ok(ImageBuffer { height: h, width: w, data })
}

/// Quantizes with round-half-up to 8 bits and writes PNG or JPEG according
/// to the file extension. A save-then-load round trip moves any pixel by at
/// most `1/510`.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = img.dims();
    let mut raw = vec![0u8; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            let px = (y * w + x) * 3;
            for c in 0..CHANNELS {
                raw[px + c] = quantize(img.get(c, y, x));
            }
        }
    }
    let rgb = image::RgbImage::from_raw(w as u32, h as u32, raw)
        .expect("buffer length matches dimensions");
    rgb.save(path).map_err(|e| Error::write(path, e))
}

/// round(v * 255) with round-half-up and clamping.
#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Root mean squared pixel difference over all channels and locations.
pub fn rmse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "rmse operands differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum / a.data.len() as f64).sqrt())
}

/// An image together with its class label.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub image: ImageBuffer,
    pub label: usize,
}

/// An ordered, labeled image collection.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    class_count: usize,
    name: String,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, class_count: usize, name: impl Into<String>) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::Domain("class count must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Domain("dataset must contain at least one sample".into()));
        }
        if let Some(s) = samples.iter().find(|s| s.label >= class_count) {
            return Err(Error::Domain(format!(
                "label {} outside [0, {class_count})",
                s.label
            )));
        }
        Ok(Dataset {
            samples,
            class_count,
            name: name.into(),
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Balanced prefix: the first `per_class` samples of each class, in
    /// original order.
    pub fn take_per_class(&self, per_class: usize, name: impl Into<String>) -> Result<Dataset> {
        let mut counts = vec![0usize; self.class_count];
        let mut samples = Vec::new();
        for s in &self.samples {
            if counts[s.label] < per_class {
                counts[s.label] += 1;
                samples.push(s.clone());
            }
        }
        Dataset::new(samples, self.class_count, name)
    }
}

/// Loads a directory dataset: one subdirectory per class (sorted by name),
/// PNG/JPEG files inside (sorted by name).
pub fn load_dataset_dir(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut class_dirs: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| Error::read(path, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::read(path, "no class subdirectories found"));
    }
    let mut samples = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::read(dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| is_raster(p))
            .collect();
        files.sort();
        for file in files {
            samples.push(LabeledSample {
                image: load_image(&file)?,
                label,
            });
        }
    }
    let class_count = class_dirs.len();
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Dataset::new(samples, class_count, name)
}

pub(crate) fn is_raster(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png") | Some("jpg") | Some("jpeg")
    )
}
