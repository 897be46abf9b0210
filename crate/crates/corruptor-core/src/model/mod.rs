//! A small convolutional classifier with hand-written forward and backward
//! passes, exposing the feature-extractor / pooling / linear-classifier
//! decomposition that class activation maps require.
//!
//! Topology: conv 3->16 (3x3, stride 1, pad 1), relu, 2x2 max pool,
//! conv 16->32 (same geometry), relu, 2x2 max pool, spatial mean pooling,
//! linear classifier without bias. Logits are `W^T P(g(x))` by
//! construction. All arithmetic is f64.

mod serialize;
mod synthetic;
mod trainer;

pub use serialize::{load_model, save_model};
pub use synthetic::{make_benchmark, SyntheticDGBench, BENCH_IMAGE_SIZE};
pub use trainer::{evaluate, train, EpochMetrics, EvalReport, TrainConfig, TrainOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cam::{self, Classifier, FeatureMap, LossReport, LossSettings};
use crate::error::{Error, Result};
use crate::imagecore::{ImageBuffer, CHANNELS};
use crate::registry::mix;

const CONV1_OUT: usize = 16;
const CONV2_OUT: usize = 32;
const KERNEL: usize = 3;

/// Feature channels produced by the extractor (input to the classifier).
pub const FEATURE_CHANNELS: usize = CONV2_OUT;

/// The two-block convolutional classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyConvNet {
    conv1_w: Vec<f64>,
    conv1_b: Vec<f64>,
    conv2_w: Vec<f64>,
    conv2_b: Vec<f64>,
    classifier: Classifier,
}

/// Everything the forward pass produces for one image.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub features: FeatureMap,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// One training example: the clean image, optionally a corrupted view, and
/// the label. Without a corrupted view the loss falls back to single-branch
/// cross-entropy (no consistency terms).
#[derive(Debug)]
pub struct TrainingPair<'a> {
    pub clean: &'a ImageBuffer,
    pub corrupt: Option<ImageBuffer>,
    pub label: usize,
}

/// Gradients (or momentum buffers) for every parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub classifier_w: Vec<f64>,
}

impl ParamGrads {
    fn zeros(class_count: usize) -> Self {
        ParamGrads {
            conv1_w: vec![0.0; CONV1_OUT * CHANNELS * KERNEL * KERNEL],
            conv1_b: vec![0.0; CONV1_OUT],
            conv2_w: vec![0.0; CONV2_OUT * CONV1_OUT * KERNEL * KERNEL],
            conv2_b: vec![0.0; CONV2_OUT],
            classifier_w: vec![0.0; CONV2_OUT * class_count],
        }
    }

    fn scale(&mut self, factor: f64) {
        for tensor in self.tensors_mut() {
            for v in tensor {
                *v *= factor;
            }
        }
    }

    /// `self = momentum * self + grads` (momentum buffer update).
    pub(crate) fn momentum_update(&mut self, momentum: f64, grads: &ParamGrads) {
        for (buf, g) in self.tensors_mut().into_iter().zip(grads.tensors()) {
            for (b, gv) in buf.iter_mut().zip(g) {
                *b = momentum * *b + gv;
            }
        }
    }

    fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.classifier_w,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.classifier_w,
        ]
    }

    /// Flat concatenation in canonical parameter order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }
}

impl TinyConvNet {
    /// Fan-in-scaled uniform initialization for weights, zero biases, all
    /// derived from `seed`.
    pub fn new(class_count: usize, seed: u64) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::Domain("class count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ 0x1217_C0DE));
        let uniform = |rng: &mut ChaCha8Rng, count: usize, fan_in: usize| -> Vec<f64> {
            let limit = 1.0 / (fan_in as f64).sqrt();
            (0..count)
                .map(|_| rng.random::<f64>() * 2.0 * limit - limit)
                .collect()
        };
        let conv1_w = uniform(&mut rng, CONV1_OUT * CHANNELS * KERNEL * KERNEL, CHANNELS * KERNEL * KERNEL);
        let conv2_w = uniform(&mut rng, CONV2_OUT * CONV1_OUT * KERNEL * KERNEL, CONV1_OUT * KERNEL * KERNEL);
        let classifier_w = uniform(&mut rng, CONV2_OUT * class_count, CONV2_OUT);
        Ok(TinyConvNet {
            conv1_w,
            conv1_b: vec![0.0; CONV1_OUT],
            conv2_w,
            conv2_b: vec![0.0; CONV2_OUT],
            classifier: Classifier::new(CONV2_OUT, class_count, classifier_w)?,
        })
    }

    pub fn class_count(&self) -> usize {
        self.classifier.class_count()
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    /// Total trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        Self::parameter_count_for(self.class_count())
    }

    pub fn parameter_count_for(class_count: usize) -> usize {
        CONV1_OUT * CHANNELS * KERNEL * KERNEL
            + CONV1_OUT
            + CONV2_OUT * CONV1_OUT * KERNEL * KERNEL
            + CONV2_OUT
            + CONV2_OUT * class_count
    }

    /// Flat parameter vector in canonical order:
    /// conv1_w, conv1_b, conv2_w, conv2_b, classifier_w.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        out.extend_from_slice(&self.conv1_w);
        out.extend_from_slice(&self.conv1_b);
        out.extend_from_slice(&self.conv2_w);
        out.extend_from_slice(&self.conv2_b);
        out.extend_from_slice(self.classifier.weights());
        out
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_flat(class_count: usize, params: &[f64]) -> Result<Self> {
        let expected = Self::parameter_count_for(class_count);
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} parameters for {class_count} classes, got {}",
                params.len()
            )));
        }
        let mut offset = 0;
        let mut take = |count: usize| {
            let slice = params[offset..offset + count].to_vec();
            offset += count;
            slice
        };
        let conv1_w = take(CONV1_OUT * CHANNELS * KERNEL * KERNEL);
        let conv1_b = take(CONV1_OUT);
        let conv2_w = take(CONV2_OUT * CONV1_OUT * KERNEL * KERNEL);
        let conv2_b = take(CONV2_OUT);
        let classifier_w = take(CONV2_OUT * class_count);
        Ok(TinyConvNet {
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            classifier: Classifier::new(CONV2_OUT, class_count, classifier_w)?,
        })
    }

    /// Applies one SGD step: `params -= lr * velocity`.
    pub(crate) fn apply_velocity(&mut self, velocity: &ParamGrads, lr: f64) {
        let tensors: [&mut [f64]; 5] = [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            self.classifier.weights_mut(),
        ];
        for (params, v) in tensors.into_iter().zip(velocity.tensors()) {
            for (p, vi) in params.iter_mut().zip(v) {
                *p -= lr * vi;
            }
        }
    }

    /// Feature map, logits, and class probabilities for one image.
    pub fn forward(&self, img: &ImageBuffer) -> Result<ForwardPass> {
        let trace = self.forward_trace(img)?;
        self.head(&trace)
    }

    fn head(&self, trace: &ForwardTrace) -> Result<ForwardPass> {
        let features = FeatureMap::new(CONV2_OUT, trace.s2, trace.features.clone())?;
        let logits = self.classifier.logits(&features.pooled())?;
        let probs = cam::softmax_with_temperature(&logits, 1.0);
        Ok(ForwardPass { features, logits, probs })
    }

    fn forward_trace(&self, img: &ImageBuffer) -> Result<ForwardTrace> {
        let (h, w) = img.dims();
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::Shape(format!(
                "image size {h}x{w} must be divisible by 4"
            )));
        }
        let a1 = conv3x3(img.data(), CHANNELS, h, w, &self.conv1_w, &self.conv1_b, CONV1_OUT);
        let z1 = relu(&a1);
        let (h1, w1) = (h / 2, w / 2);
        let (p1, arg1) = maxpool2(&z1, CONV1_OUT, h, w);
        let a2 = conv3x3(&p1, CONV1_OUT, h1, w1, &self.conv2_w, &self.conv2_b, CONV2_OUT);
        let z2 = relu(&a2);
        let (features, arg2) = maxpool2(&z2, CONV2_OUT, h1, w1);
        Ok(ForwardTrace {
            input: img.data().to_vec(),
            h,
            w,
            a1,
            p1,
            arg1,
            a2,
            features,
            arg2,
            s2: (h / 4) * (w / 4),
        })
    }

    /// Mean per-sample gradients and loss over a batch. The consistency
    /// settings come from `loss`; pairs without a corrupted view contribute
    /// single-branch cross-entropy only.
    pub fn backward(
        &self,
        batch: &[TrainingPair<'_>],
        loss: LossSettings,
    ) -> Result<(ParamGrads, LossReport)> {
        if batch.is_empty() {
            return Err(Error::Domain("batch must be nonempty".into()));
        }
        let class_count = self.class_count();
        let mut grads = ParamGrads::zeros(class_count);
        let (mut ce_sum, mut cam_sum, mut neg_sum) = (0.0, 0.0, 0.0);

        for pair in batch {
            if pair.label >= class_count {
                return Err(Error::Domain(format!(
                    "label {} outside [0, {class_count})",
                    pair.label
                )));
            }
            let clean = self.forward_trace(pair.clean)?;
            match &pair.corrupt {
                Some(corrupt_img) => {
                    let corrupt = self.forward_trace(corrupt_img)?;
                    let f_clean = FeatureMap::new(CONV2_OUT, clean.s2, clean.features.clone())?;
                    let f_corrupt =
                        FeatureMap::new(CONV2_OUT, corrupt.s2, corrupt.features.clone())?;
                    let lg = cam::gradients(&f_clean, &f_corrupt, &self.classifier, pair.label, loss)?;
                    ce_sum += lg.report.ce;
                    cam_sum += lg.report.cam;
                    neg_sum += lg.report.neg;
                    for (g, l) in grads.classifier_w.iter_mut().zip(&lg.weights) {
                        *g += l;
                    }
                    self.backprop_features(&clean, &lg.features_clean, &mut grads);
                    self.backprop_features(&corrupt, &lg.features_corrupt, &mut grads);
                }
                None => {
                    // Single branch: plain cross-entropy on the clean view.
                    let pass = self.head(&clean)?;
                    ce_sum += -pass.probs[pair.label].max(cam::LOG_EPS).ln();
                    let mut d_logits = pass.probs.clone();
                    d_logits[pair.label] -= 1.0;
                    let pooled = pass.features.pooled();
                    let inv_s = 1.0 / clean.s2 as f64;
                    let mut d_features = vec![0.0; CONV2_OUT * clean.s2];
                    for i in 0..CONV2_OUT {
                        let mut wi_dz = 0.0;
                        for c in 0..class_count {
                            grads.classifier_w[i * class_count + c] += pooled[i] * d_logits[c];
                            wi_dz += self.classifier.weight(i, c) * d_logits[c];
                        }
                        let contribution = wi_dz * inv_s;
                        for j in 0..clean.s2 {
                            d_features[i * clean.s2 + j] += contribution;
                        }
                    }
                    self.backprop_features(&clean, &d_features, &mut grads);
                }
            }
        }

        let inv = 1.0 / batch.len() as f64;
        grads.scale(inv);
        let report = cam::total_loss(
            ce_sum * inv,
            cam_sum * inv,
            neg_sum * inv,
            loss.lambda,
            loss.mode,
        )?;
        Ok((grads, report))
    }

    /// Chains a gradient on the final feature map back through pool2, relu2,
    /// conv2, pool1, relu1, conv1, accumulating parameter gradients.
    fn backprop_features(&self, trace: &ForwardTrace, d_features: &[f64], grads: &mut ParamGrads) {
        let (h, w) = (trace.h, trace.w);
        let (h1, w1) = (h / 2, w / 2);
        let d_z2 = unpool2(d_features, &trace.arg2, CONV2_OUT, h1, w1);
        let d_a2 = relu_backward(&d_z2, &trace.a2);
        let d_p1 = conv3x3_backward(
            &trace.p1,
            CONV1_OUT,
            h1,
            w1,
            &self.conv2_w,
            CONV2_OUT,
            &d_a2,
            &mut grads.conv2_w,
            &mut grads.conv2_b,
        );
        let d_z1 = unpool2(&d_p1, &trace.arg1, CONV1_OUT, h, w);
        let d_a1 = relu_backward(&d_z1, &trace.a1);
        conv3x3_backward(
            &trace.input,
            CHANNELS,
            h,
            w,
            &self.conv1_w,
            CONV1_OUT,
            &d_a1,
            &mut grads.conv1_w,
            &mut grads.conv1_b,
        );
    }
}

/// Cached activations of one forward pass.
struct ForwardTrace {
    input: Vec<f64>,
    h: usize,
    w: usize,
    /// Pre-relu conv1 output, 16 planes of h x w.
    a1: Vec<f64>,
    /// Pooled relu(a1), 16 planes of h/2 x w/2 (conv2 input).
    p1: Vec<f64>,
    /// Argmax source index (within each plane) of pool 1.
    arg1: Vec<u32>,
    /// Pre-relu conv2 output, 32 planes of h/2 x w/2.
    a2: Vec<f64>,
    /// Final feature map, 32 planes of h/4 x w/4.
    features: Vec<f64>,
    /// Argmax source index of pool 2.
    arg2: Vec<u32>,
    s2: usize,
}

/// 3x3 convolution, stride 1, zero padding 1. Input and output are
/// channel-major planes.
fn conv3x3(
    input: &[f64],
    in_channels: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    bias: &[f64],
    out_channels: usize,
) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; out_channels * hw];
    for co in 0..out_channels {
        let out_plane = &mut out[co * hw..(co + 1) * hw];
        out_plane.fill(bias[co]);
        for ci in 0..in_channels {
            let in_plane = &input[ci * hw..(ci + 1) * hw];
            for ky in 0..KERNEL {
                let dy = ky as i64 - 1;
                for kx in 0..KERNEL {
                    let dx = kx as i64 - 1;
                    let wgt = weights[((co * in_channels + ci) * KERNEL + ky) * KERNEL + kx];
                    let y0 = (-dy).max(0) as usize;
                    let y1 = ((h as i64 - dy).min(h as i64)) as usize;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = ((w as i64 - dx).min(w as i64)) as usize;
                    for y in y0..y1 {
                        let sy = (y as i64 + dy) as usize;
                        let src = &in_plane[sy * w + (x0 as i64 + dx) as usize..][..x1 - x0];
                        let dst = &mut out_plane[y * w + x0..][..x1 - x0];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wgt * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Backward pass of [`conv3x3`]: accumulates weight and bias gradients and
/// returns the gradient with respect to the input.
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    in_channels: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    out_channels: usize,
    d_out: &[f64],
    d_weights: &mut [f64],
    d_bias: &mut [f64],
) -> Vec<f64> {
    let hw = h * w;
    let mut d_in = vec![0.0; in_channels * hw];
    for co in 0..out_channels {
        let d_plane = &d_out[co * hw..(co + 1) * hw];
        d_bias[co] += d_plane.iter().sum::<f64>();
        for ci in 0..in_channels {
            let in_plane = &input[ci * hw..(ci + 1) * hw];
            let d_in_plane = &mut d_in[ci * hw..(ci + 1) * hw];
            for ky in 0..KERNEL {
                let dy = ky as i64 - 1;
                for kx in 0..KERNEL {
                    let dx = kx as i64 - 1;
                    let widx = ((co * in_channels + ci) * KERNEL + ky) * KERNEL + kx;
                    let wgt = weights[widx];
                    let y0 = (-dy).max(0) as usize;
                    let y1 = ((h as i64 - dy).min(h as i64)) as usize;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = ((w as i64 - dx).min(w as i64)) as usize;
                    let mut dw = 0.0;
                    for y in y0..y1 {
                        let sy = (y as i64 + dy) as usize;
                        let d_row = &d_plane[y * w..][x0..x1];
                        let in_row = &in_plane[sy * w + ((x0 as i64 + dx) as usize)..][..x1 - x0];
                        let d_in_row =
                            &mut d_in_plane[sy * w + ((x0 as i64 + dx) as usize)..][..x1 - x0];
                        for ((dv, iv), div) in d_row.iter().zip(in_row).zip(d_in_row) {
                            dw += dv * iv;
                            *div += wgt * dv;
                        }
                    }
                    d_weights[widx] += dw;
                }
            }
        }
    }
    d_in
}

fn relu(a: &[f64]) -> Vec<f64> {
    a.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// Gradient passes only where the pre-activation was strictly positive.
fn relu_backward(d_out: &[f64], pre: &[f64]) -> Vec<f64> {
    d_out
        .iter()
        .zip(pre)
        .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
        .collect()
}

/// 2x2 max pooling with stride 2. Returns pooled planes and, per output
/// cell, the flat source index within its plane; ties pick the earliest
/// index in scan order.
fn maxpool2(input: &[f64], channels: usize, h: usize, w: usize) -> (Vec<f64>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let hw = h * w;
    let mut out = vec![0.0; channels * oh * ow];
    let mut arg = vec![0u32; channels * oh * ow];
    for c in 0..channels {
        let plane = &input[c * hw..(c + 1) * hw];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0u32;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let idx = (oy * 2 + dy) * w + ox * 2 + dx;
                        if plane[idx] > best {
                            best = plane[idx];
                            best_idx = idx as u32;
                        }
                    }
                }
                out[(c * oh + oy) * ow + ox] = best;
                arg[(c * oh + oy) * ow + ox] = best_idx;
            }
        }
    }
    (out, arg)
}

/// Scatters pooled gradients back to their argmax sources.
fn unpool2(d_out: &[f64], arg: &[u32], channels: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let cells = d_out.len() / channels;
    let mut d_in = vec![0.0; channels * hw];
    for c in 0..channels {
        for cell in 0..cells {
            let flat = c * cells + cell;
            d_in[c * hw + arg[flat] as usize] += d_out[flat];
        }
    }
    d_in
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_image(seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(8, 8, |_, _, _| rng.random()).unwrap()
    }

    #[test]
    fn zero_network_predicts_uniformly() {
        let params = vec![0.0; TinyConvNet::parameter_count_for(3)];
        let net = TinyConvNet::from_flat(3, &params).unwrap();
        let pass = net.forward(&small_image(1)).unwrap();
        for p in &pass.probs {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn probs_are_normalized() {
        let net = TinyConvNet::new(4, 9).unwrap();
        let pass = net.forward(&small_image(2)).unwrap();
        let sum: f64 = pass.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cam_decomposition_identity() {
        // mean over locations of W^T G equals the logits.
        let net = TinyConvNet::new(3, 7).unwrap();
        let pass = net.forward(&small_image(3)).unwrap();
        let s = pass.features.locations();
        for c in 0..3 {
            let mut mean = 0.0;
            for j in 0..s {
                let mut acc = 0.0;
                for i in 0..FEATURE_CHANNELS {
                    acc += net.classifier().weight(i, c) * pass.features.get(i, j);
                }
                mean += acc;
            }
            mean /= s as f64;
            assert_abs_diff_eq!(mean, pass.logits[c], epsilon = 1e-9);
        }
    }

    #[test]
    fn size_not_divisible_by_four_rejected() {
        let net = TinyConvNet::new(3, 0).unwrap();
        let img = ImageBuffer::new(10, 12).unwrap();
        assert!(matches!(net.forward(&img), Err(Error::Shape(_))));
    }

    #[test]
    fn parameter_count_is_reported() {
        let net = TinyConvNet::new(3, 0).unwrap();
        // conv1: 16*3*9 + 16; conv2: 32*16*9 + 32; classifier: 32*3.
        assert_eq!(net.parameter_count(), 432 + 16 + 4608 + 32 + 96);
        assert_eq!(net.params_flat().len(), net.parameter_count());
    }

    #[test]
    fn params_round_trip_through_flat() {
        let net = TinyConvNet::new(5, 123).unwrap();
        let rebuilt = TinyConvNet::from_flat(5, &net.params_flat()).unwrap();
        assert_eq!(net, rebuilt);
    }

    #[test]
    fn identical_pair_doubles_single_branch_ce_gradient() {
        let net = TinyConvNet::new(3, 11).unwrap();
        let img = small_image(4);
        let loss = LossSettings {
            lambda: 0.0,
            temperature: 1.0,
            k: 2,
            mode: crate::cam::ConsistencyMode::CamJsd,
        };
        let both = net
            .backward(
                &[TrainingPair { clean: &img, corrupt: Some(img.clone()), label: 1 }],
                loss,
            )
            .unwrap();
        let single = net
            .backward(&[TrainingPair { clean: &img, corrupt: None, label: 1 }], loss)
            .unwrap();
        for (a, b) in both.0.flat().iter().zip(single.0.flat()) {
            assert_abs_diff_eq!(*a, 2.0 * b, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(both.1.ce, 2.0 * single.1.ce, epsilon = 1e-12);
    }

    #[test]
    fn dead_channel_gets_zero_gradient() {
        // Force conv1 channel 0 permanently negative via a large negative
        // bias: its weights must receive zero gradient.
        let net = TinyConvNet::new(3, 2).unwrap();
        let mut params = net.params_flat();
        let conv1_w_len = CONV1_OUT * CHANNELS * KERNEL * KERNEL;
        params[conv1_w_len] = -100.0; // conv1_b[0]
        let net = TinyConvNet::from_flat(3, &params).unwrap();
        let img = small_image(5);
        let loss = LossSettings {
            lambda: 0.06,
            temperature: 1.0,
            k: 2,
            mode: crate::cam::ConsistencyMode::CamJsd,
        };
        let (grads, _) = net
            .backward(
                &[TrainingPair { clean: &img, corrupt: Some(small_image(6)), label: 0 }],
                loss,
            )
            .unwrap();
        for kx in 0..CHANNELS * KERNEL * KERNEL {
            assert_eq!(grads.conv1_w[kx], 0.0);
        }
        assert_eq!(grads.conv1_b[0], 0.0);
    }

    #[test]
    fn forward_is_deterministic() {
        let net = TinyConvNet::new(3, 21).unwrap();
        let img = small_image(7);
        let a = net.forward(&img).unwrap();
        let b = net.forward(&img).unwrap();
        assert_eq!(a.probs, b.probs);
        assert_eq!(a.features.values(), b.features.values());
    }
}
