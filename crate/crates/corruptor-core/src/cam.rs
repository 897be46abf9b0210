//! Class activation maps with temperature softmax, the attention-consistency
//! and negative-CAM losses, the combined objective, and their analytic
//! gradients with respect to feature maps and classifier weights.
//!
//! All losses use the natural logarithm and an epsilon floor of `1e-12`
//! inside every log, so KL and JSD terms stay finite when a softmax
//! underflows.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Floor applied to every log argument.
pub const LOG_EPS: f64 = 1e-12;

/// A feature tensor with `channels` rows over `locations` flattened spatial
/// positions, row-major by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    locations: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, locations: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || locations == 0 {
            return Err(Error::Domain("feature map dimensions must be positive".into()));
        }
        if values.len() != channels * locations {
            return Err(Error::Shape(format!(
                "feature map expects {} values, got {}",
                channels * locations,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature map contains non-finite values".into()));
        }
        Ok(FeatureMap { channels, locations, values })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn locations(&self) -> usize {
        self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, channel: usize, location: usize) -> f64 {
        self.values[channel * self.locations + location]
    }

    /// Spatial mean per channel (the pooling operation `P`).
    pub fn pooled(&self) -> Vec<f64> {
        let inv = 1.0 / self.locations as f64;
        (0..self.channels)
            .map(|i| {
                self.values[i * self.locations..(i + 1) * self.locations]
                    .iter()
                    .sum::<f64>()
                    * inv
            })
            .collect()
    }
}

/// A linear classifier: an `n x C` weight matrix, row-major by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    channels: usize,
    class_count: usize,
    weights: Vec<f64>,
}

impl Classifier {
    pub fn new(channels: usize, class_count: usize, weights: Vec<f64>) -> Result<Self> {
        if channels == 0 || class_count == 0 {
            return Err(Error::Domain("classifier dimensions must be positive".into()));
        }
        if weights.len() != channels * class_count {
            return Err(Error::Shape(format!(
                "classifier expects {} weights, got {}",
                channels * class_count,
                weights.len()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("classifier contains non-finite weights".into()));
        }
        Ok(Classifier { channels, class_count, weights })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    pub fn weight(&self, channel: usize, class: usize) -> f64 {
        self.weights[channel * self.class_count + class]
    }

    /// `W^T p`: logits from a pooled feature vector.
    pub fn logits(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        if pooled.len() != self.channels {
            return Err(Error::Shape(format!(
                "pooled vector has {} entries, classifier expects {}",
                pooled.len(),
                self.channels
            )));
        }
        let mut logits = vec![0.0; self.class_count];
        for (i, &p) in pooled.iter().enumerate() {
            let row = &self.weights[i * self.class_count..(i + 1) * self.class_count];
            for (c, &w) in row.iter().enumerate() {
                logits[c] += w * p;
            }
        }
        Ok(logits)
    }
}

/// Per-class spatial attention distributions: a `C x s` matrix whose rows
/// are location softmaxes at a shared temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct CamSet {
    class_count: usize,
    locations: usize,
    temperature: f64,
    maps: Vec<f64>,
}

impl CamSet {
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn locations(&self) -> usize {
        self.locations
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Attention distribution of one class.
    pub fn row(&self, class: usize) -> &[f64] {
        &self.maps[class * self.locations..(class + 1) * self.locations]
    }
}

/// The top-k non-ground-truth classes by clean-image confidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSet {
    classes: Vec<usize>,
}

impl NegativeSet {
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Which consistency objective the total loss uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsistencyMode {
    /// Jensen-Shannon divergence between ground-truth CAM rows, plus the
    /// negative-CAM term.
    CamJsd,
    /// Mean squared error between ground-truth CAM rows.
    CamMse,
    /// Jensen-Shannon divergence between prediction vectors.
    PredJsd,
    /// Negative-CAM term only.
    NegOnly,
    /// Cross-entropy only.
    None,
}

impl ConsistencyMode {
    pub const ALL: [ConsistencyMode; 5] = [
        ConsistencyMode::CamJsd,
        ConsistencyMode::CamMse,
        ConsistencyMode::PredJsd,
        ConsistencyMode::NegOnly,
        ConsistencyMode::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConsistencyMode::CamJsd => "cam_jsd",
            ConsistencyMode::CamMse => "cam_mse",
            ConsistencyMode::PredJsd => "pred_jsd",
            ConsistencyMode::NegOnly => "neg_only",
            ConsistencyMode::None => "none",
        }
    }
}

impl fmt::Display for ConsistencyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConsistencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConsistencyMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown consistency mode `{s}`")))
    }
}

/// Decomposed loss values for one sample or batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub ce: f64,
    pub cam: f64,
    pub neg: f64,
    pub total: f64,
    pub lambda: f64,
    pub mode: ConsistencyMode,
}

/// Gradients of the total loss with respect to both feature maps (each
/// `n x s`, row-major by channel) and the classifier weights (`n x C`).
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub features_clean: Vec<f64>,
    pub features_corrupt: Vec<f64>,
    pub weights: Vec<f64>,
    pub report: LossReport,
}

/// Row-wise location softmax of `W^T G` at temperature `T` (the CAM matrix).
pub fn compute_cam(
    features: &FeatureMap,
    classifier: &Classifier,
    temperature: f64,
) -> Result<CamSet> {
    if classifier.channels() != features.channels() {
        return Err(Error::Shape(format!(
            "classifier has {} channels, features have {}",
            classifier.channels(),
            features.channels()
        )));
    }
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::Domain(format!("temperature {temperature} must be positive")));
    }
    let (n, s, c_count) = (features.channels(), features.locations(), classifier.class_count());
    let mut maps = Vec::with_capacity(c_count * s);
    let mut row = vec![0.0; s];
    for c in 0..c_count {
        for (j, r) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                acc += classifier.weight(i, c) * features.get(i, j);
            }
            *r = acc;
        }
        maps.extend(softmax_with_temperature(&row, temperature));
    }
    Ok(CamSet { class_count: c_count, locations: s, temperature, maps })
}

/// Summed cross-entropy of the ground-truth class under both views:
/// `-ln p_clean[y] - ln p_corrupt[y]`.
pub fn loss_ce(probs_clean: &[f64], probs_corrupt: &[f64], label: usize) -> Result<f64> {
    check_simplex(probs_clean)?;
    check_simplex(probs_corrupt)?;
    if probs_clean.len() != probs_corrupt.len() {
        return Err(Error::Shape("prediction vectors differ in length".into()));
    }
    if label >= probs_clean.len() {
        return Err(Error::Domain(format!(
            "label {label} outside [0, {})",
            probs_clean.len()
        )));
    }
    Ok(-ln_floored(probs_clean[label]) - ln_floored(probs_corrupt[label]))
}

/// Jensen-Shannon divergence between the ground-truth CAM rows of the two
/// views. Lies in `[0, ln 2]`.
pub fn loss_cam(cam_clean: &CamSet, cam_corrupt: &CamSet, label: usize) -> Result<f64> {
    check_cam_pair(cam_clean, cam_corrupt, label)?;
    Ok(jsd(cam_clean.row(label), cam_corrupt.row(label)))
}

/// Mean squared difference of the ground-truth CAM rows.
pub fn loss_cam_mse(cam_clean: &CamSet, cam_corrupt: &CamSet, label: usize) -> Result<f64> {
    check_cam_pair(cam_clean, cam_corrupt, label)?;
    let (p, q) = (cam_clean.row(label), cam_corrupt.row(label));
    let sum: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / p.len() as f64)
}

/// Jensen-Shannon divergence between the two prediction vectors.
pub fn loss_pred_jsd(probs_clean: &[f64], probs_corrupt: &[f64]) -> Result<f64> {
    check_simplex(probs_clean)?;
    check_simplex(probs_corrupt)?;
    if probs_clean.len() != probs_corrupt.len() {
        return Err(Error::Shape("prediction vectors differ in length".into()));
    }
    Ok(jsd(probs_clean, probs_corrupt))
}

/// The `k` classes other than `label` with the highest clean-image
/// confidence, ordered by descending confidence; ties break toward the
/// lower class index.
pub fn top_k_negatives(probs_clean: &[f64], label: usize, k: usize) -> Result<NegativeSet> {
    let c = probs_clean.len();
    if label >= c {
        return Err(Error::Domain(format!("label {label} outside [0, {c})")));
    }
    if k == 0 || k > c - 1 {
        return Err(Error::Domain(format!(
            "k = {k} outside [1, {}] for {c} classes",
            c - 1
        )));
    }
    Ok(NegativeSet { classes: top_k_indices(probs_clean, label, k) })
}

fn top_k_indices(probs: &[f64], label: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).filter(|&i| i != label).collect();
    order.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

/// Pushes the CAM rows of the negative classes toward the uniform
/// distribution in both views: `sum_c KL(U || M_c) + KL(U || M_hat_c)`.
pub fn loss_neg(
    cam_clean: &CamSet,
    cam_corrupt: &CamSet,
    negatives: &NegativeSet,
) -> Result<f64> {
    check_cam_shapes(cam_clean, cam_corrupt)?;
    let mut total = 0.0;
    for &c in negatives.classes() {
        if c >= cam_clean.class_count() {
            return Err(Error::Domain(format!(
                "negative class {c} outside [0, {})",
                cam_clean.class_count()
            )));
        }
        total += kl_uniform(cam_clean.row(c)) + kl_uniform(cam_corrupt.row(c));
    }
    Ok(total)
}

/// Assembles the total objective from its parts:
///
/// - `cam_jsd`: `ce + lambda * (cam + neg)`
/// - `cam_mse` / `pred_jsd`: `ce + lambda * cam` (the `cam` slot carries the
///   substituted consistency value, `neg` is dropped)
/// - `neg_only`: `ce + lambda * neg`
/// - `none`: `ce`
pub fn total_loss(ce: f64, cam: f64, neg: f64, lambda: f64, mode: ConsistencyMode) -> Result<LossReport> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda {lambda} must be nonnegative")));
    }
    let (cam, neg) = match mode {
        ConsistencyMode::CamJsd => (cam, neg),
        ConsistencyMode::CamMse | ConsistencyMode::PredJsd => (cam, 0.0),
        ConsistencyMode::NegOnly => (0.0, neg),
        ConsistencyMode::None => (0.0, 0.0),
    };
    let total = match mode {
        ConsistencyMode::CamJsd => ce + lambda * (cam + neg),
        ConsistencyMode::CamMse | ConsistencyMode::PredJsd => ce + lambda * cam,
        ConsistencyMode::NegOnly => ce + lambda * neg,
        ConsistencyMode::None => ce,
    };
    Ok(LossReport { ce, cam, neg, total, lambda, mode })
}

/// Settings for the combined objective.
#[derive(Debug, Clone, Copy)]
pub struct LossSettings {
    pub lambda: f64,
    pub temperature: f64,
    /// Number of negative classes; 0 disables the negative term.
    pub k: usize,
    pub mode: ConsistencyMode,
}

/// Computes every loss component for one (clean, corrupt) feature pair and
/// assembles the total. Predictions are obtained from the feature maps via
/// spatial mean pooling and the classifier.
pub fn evaluate_losses(
    features_clean: &FeatureMap,
    features_corrupt: &FeatureMap,
    classifier: &Classifier,
    label: usize,
    settings: LossSettings,
) -> Result<LossReport> {
    let ctx = Context::prepare(features_clean, features_corrupt, classifier, label, settings)?;
    ctx.report(settings)
}

/// Analytic gradients of the total loss. Gradient flows through both the
/// clean and corrupted branches of every consistency term; the top-k
/// selection itself is treated as constant.
pub fn gradients(
    features_clean: &FeatureMap,
    features_corrupt: &FeatureMap,
    classifier: &Classifier,
    label: usize,
    settings: LossSettings,
) -> Result<LossGradients> {
    let ctx = Context::prepare(features_clean, features_corrupt, classifier, label, settings)?;
    let report = ctx.report(settings)?;

    let (n, s, c_count) = (ctx.channels, ctx.locations, ctx.class_count);
    let mut d_clean = vec![0.0; n * s];
    let mut d_corrupt = vec![0.0; n * s];
    let mut d_weights = vec![0.0; n * c_count];

    // Cross-entropy, both branches.
    for (branch, d_feat) in [(&ctx.clean, &mut d_clean), (&ctx.corrupt, &mut d_corrupt)] {
        let mut d_logits = branch.probs.clone();
        d_logits[label] -= 1.0;
        accumulate_linear(branch, classifier, &d_logits, d_feat, &mut d_weights, s);
    }

    let lambda = settings.lambda;
    match settings.mode {
        ConsistencyMode::None => {}
        ConsistencyMode::CamJsd => {
            // d JSD / dP = ln(P/m) / 2 on each side.
            let p = ctx.clean.cam_row(label, s);
            let q = ctx.corrupt.cam_row(label, s);
            let mut gp = vec![0.0; s];
            let mut gq = vec![0.0; s];
            for j in 0..s {
                let m = 0.5 * (p[j] + q[j]);
                gp[j] = lambda * 0.5 * (ln_floored(p[j]) - ln_floored(m));
                gq[j] = lambda * 0.5 * (ln_floored(q[j]) - ln_floored(m));
            }
            backprop_cam_row(&ctx.clean, classifier, label, &gp, settings.temperature, &mut d_clean, &mut d_weights, s);
            backprop_cam_row(&ctx.corrupt, classifier, label, &gq, settings.temperature, &mut d_corrupt, &mut d_weights, s);
            accumulate_negative_grads(&ctx, classifier, lambda, settings.temperature, &mut d_clean, &mut d_corrupt, &mut d_weights);
        }
        ConsistencyMode::CamMse => {
            let p = ctx.clean.cam_row(label, s);
            let q = ctx.corrupt.cam_row(label, s);
            let scale = lambda * 2.0 / s as f64;
            let gp: Vec<f64> = (0..s).map(|j| scale * (p[j] - q[j])).collect();
            let gq: Vec<f64> = (0..s).map(|j| -scale * (p[j] - q[j])).collect();
            backprop_cam_row(&ctx.clean, classifier, label, &gp, settings.temperature, &mut d_clean, &mut d_weights, s);
            backprop_cam_row(&ctx.corrupt, classifier, label, &gq, settings.temperature, &mut d_corrupt, &mut d_weights, s);
        }
        ConsistencyMode::PredJsd => {
            let p = &ctx.clean.probs;
            let q = &ctx.corrupt.probs;
            let mut gp = vec![0.0; c_count];
            let mut gq = vec![0.0; c_count];
            for c in 0..c_count {
                let m = 0.5 * (p[c] + q[c]);
                gp[c] = lambda * 0.5 * (ln_floored(p[c]) - ln_floored(m));
                gq[c] = lambda * 0.5 * (ln_floored(q[c]) - ln_floored(m));
            }
            for (branch, g, d_feat) in [
                (&ctx.clean, &gp, &mut d_clean),
                (&ctx.corrupt, &gq, &mut d_corrupt),
            ] {
                let d_logits = softmax_backward(&branch.probs, g, 1.0);
                accumulate_linear(branch, classifier, &d_logits, d_feat, &mut d_weights, s);
            }
        }
        ConsistencyMode::NegOnly => {
            accumulate_negative_grads(&ctx, classifier, lambda, settings.temperature, &mut d_clean, &mut d_corrupt, &mut d_weights);
        }
    }

    Ok(LossGradients {
        features_clean: d_clean,
        features_corrupt: d_corrupt,
        weights: d_weights,
        report,
    })
}

/// One branch of the forward pass.
struct Branch {
    pooled: Vec<f64>,
    probs: Vec<f64>,
    /// `C x s` CAM matrix (location softmax rows).
    cams: Vec<f64>,
    /// `n x s` raw feature values.
    features: Vec<f64>,
}

impl Branch {
    fn compute(features: &FeatureMap, classifier: &Classifier, temperature: f64) -> Result<Self> {
        let pooled = features.pooled();
        let logits = classifier.logits(&pooled)?;
        let probs = softmax_with_temperature(&logits, 1.0);
        let cams = compute_cam(features, classifier, temperature)?;
        Ok(Branch {
            pooled,
            probs,
            cams: cams.maps,
            features: features.values().to_vec(),
        })
    }

    fn cam_row(&self, class: usize, s: usize) -> &[f64] {
        &self.cams[class * s..(class + 1) * s]
    }
}

/// Shared forward state for loss evaluation and gradients.
struct Context {
    channels: usize,
    locations: usize,
    class_count: usize,
    label: usize,
    negatives: Vec<usize>,
    clean: Branch,
    corrupt: Branch,
}

impl Context {
    fn prepare(
        features_clean: &FeatureMap,
        features_corrupt: &FeatureMap,
        classifier: &Classifier,
        label: usize,
        settings: LossSettings,
    ) -> Result<Self> {
        if features_clean.channels() != features_corrupt.channels()
            || features_clean.locations() != features_corrupt.locations()
        {
            return Err(Error::Shape("clean and corrupt feature maps differ in shape".into()));
        }
        let c_count = classifier.class_count();
        if label >= c_count {
            return Err(Error::Domain(format!("label {label} outside [0, {c_count})")));
        }
        if settings.k > c_count - 1 {
            return Err(Error::Domain(format!(
                "k = {} exceeds the {} available negative classes",
                settings.k,
                c_count - 1
            )));
        }
        if settings.lambda < 0.0 || !settings.lambda.is_finite() {
            return Err(Error::Domain(format!("lambda {} must be nonnegative", settings.lambda)));
        }
        let clean = Branch::compute(features_clean, classifier, settings.temperature)?;
        let corrupt = Branch::compute(features_corrupt, classifier, settings.temperature)?;
        let negatives = top_k_indices(&clean.probs, label, settings.k);
        Ok(Context {
            channels: features_clean.channels(),
            locations: features_clean.locations(),
            class_count: c_count,
            label,
            negatives,
            clean,
            corrupt,
        })
    }

    fn report(&self, settings: LossSettings) -> Result<LossReport> {
        let s = self.locations;
        let ce = -ln_floored(self.clean.probs[self.label])
            - ln_floored(self.corrupt.probs[self.label]);
        let cam = match settings.mode {
            ConsistencyMode::CamJsd => {
                jsd(self.clean.cam_row(self.label, s), self.corrupt.cam_row(self.label, s))
            }
            ConsistencyMode::CamMse => {
                let (p, q) = (self.clean.cam_row(self.label, s), self.corrupt.cam_row(self.label, s));
                p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / s as f64
            }
            ConsistencyMode::PredJsd => jsd(&self.clean.probs, &self.corrupt.probs),
            ConsistencyMode::NegOnly | ConsistencyMode::None => 0.0,
        };
        let neg = match settings.mode {
            ConsistencyMode::CamJsd | ConsistencyMode::NegOnly => self
                .negatives
                .iter()
                .map(|&c| {
                    kl_uniform(self.clean.cam_row(c, s)) + kl_uniform(self.corrupt.cam_row(c, s))
                })
                .sum(),
            _ => 0.0,
        };
        total_loss(ce, cam, neg, settings.lambda, settings.mode)
    }
}

/// Adds the gradient of a logit-level quantity: `d_weights += p d_logits^T`
/// and `d_features[i, j] += (W d_logits)[i] / s`.
fn accumulate_linear(
    branch: &Branch,
    classifier: &Classifier,
    d_logits: &[f64],
    d_features: &mut [f64],
    d_weights: &mut [f64],
    s: usize,
) {
    let n = branch.pooled.len();
    let c_count = d_logits.len();
    let inv_s = 1.0 / s as f64;
    for i in 0..n {
        let mut wi_dz = 0.0;
        for c in 0..c_count {
            d_weights[i * c_count + c] += branch.pooled[i] * d_logits[c];
            wi_dz += classifier.weight(i, c) * d_logits[c];
        }
        let contribution = wi_dz * inv_s;
        for j in 0..s {
            d_features[i * s + j] += contribution;
        }
    }
}

/// Backpropagates a gradient on one CAM row through the location softmax and
/// the `W^T G` projection.
#[allow(clippy::too_many_arguments)]
fn backprop_cam_row(
    branch: &Branch,
    classifier: &Classifier,
    class: usize,
    d_row: &[f64],
    temperature: f64,
    d_features: &mut [f64],
    d_weights: &mut [f64],
    s: usize,
) {
    let row = branch.cam_row(class, s);
    let d_logits = softmax_backward(row, d_row, temperature);
    let n = branch.pooled.len();
    let c_count = classifier.class_count();
    for i in 0..n {
        let w = classifier.weight(i, class);
        let mut dw = 0.0;
        for j in 0..s {
            d_features[i * s + j] += w * d_logits[j];
            dw += branch.features[i * s + j] * d_logits[j];
        }
        d_weights[i * c_count + class] += dw;
    }
}

/// Gradient of `KL(U || softmax(a / T))` with respect to `a` is
/// `(M - U) / T`; accumulate it for every negative class on both branches.
fn accumulate_negative_grads(
    ctx: &Context,
    classifier: &Classifier,
    lambda: f64,
    temperature: f64,
    d_clean: &mut [f64],
    d_corrupt: &mut [f64],
    d_weights: &mut [f64],
) {
    let s = ctx.locations;
    let n = ctx.channels;
    let c_count = ctx.class_count;
    let uniform = 1.0 / s as f64;
    for &c in &ctx.negatives {
        for (branch, d_feat) in [(&ctx.clean, &mut *d_clean), (&ctx.corrupt, &mut *d_corrupt)] {
            let row = branch.cam_row(c, s);
            for i in 0..n {
                let w = classifier.weight(i, c);
                let mut dw = 0.0;
                for j in 0..s {
                    let d_logit = lambda * (row[j] - uniform) / temperature;
                    d_feat[i * s + j] += w * d_logit;
                    dw += branch.features[i * s + j] * d_logit;
                }
                d_weights[i * c_count + c] += dw;
            }
        }
    }
}

/// Stable softmax with temperature: `exp((x - max)/T)` normalized.
pub(crate) fn softmax_with_temperature(xs: &[f64], temperature: f64) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xs
        .iter()
        .map(|&x| ((x - max) / temperature).exp())
        .collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Jacobian-vector product of a softmax: given the softmax output `m` and a
/// gradient `g` on it, returns the gradient on the logits (divided by `T`).
fn softmax_backward(m: &[f64], g: &[f64], temperature: f64) -> Vec<f64> {
    let dot: f64 = m.iter().zip(g).map(|(a, b)| a * b).sum();
    m.iter()
        .zip(g)
        .map(|(&mi, &gi)| mi * (gi - dot) / temperature)
        .collect()
}

#[inline]
fn ln_floored(x: f64) -> f64 {
    x.max(LOG_EPS).ln()
}

/// Equal-weight two-distribution Jensen-Shannon divergence with midpoint
/// mixture; zero-probability entries contribute exactly zero.
fn jsd(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            acc += 0.5 * a * (ln_floored(a) - ln_floored(m));
        }
        if b > 0.0 {
            acc += 0.5 * b * (ln_floored(b) - ln_floored(m));
        }
    }
    acc
}

/// `KL(U || m)` where `U` is uniform over the row.
fn kl_uniform(m: &[f64]) -> f64 {
    let u = 1.0 / m.len() as f64;
    let ln_u = u.ln();
    m.iter().map(|&v| u * (ln_u - ln_floored(v))).sum()
}

fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Shape("empty probability vector".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || p.iter().any(|&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "probability vector sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

fn check_cam_shapes(a: &CamSet, b: &CamSet) -> Result<()> {
    if a.locations != b.locations || a.class_count != b.class_count {
        return Err(Error::Shape("CAM sets differ in shape".into()));
    }
    if a.temperature != b.temperature {
        return Err(Error::Domain(format!(
            "CAM sets differ in temperature: {} vs {}",
            a.temperature, b.temperature
        )));
    }
    Ok(())
}

fn check_cam_pair(a: &CamSet, b: &CamSet, label: usize) -> Result<()> {
    check_cam_shapes(a, b)?;
    if label >= a.class_count {
        return Err(Error::Domain(format!(
            "label {label} outside [0, {})",
            a.class_count
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const LN2: f64 = std::f64::consts::LN_2;

    fn cam_from_rows(rows: &[&[f64]], temperature: f64) -> CamSet {
        let locations = rows[0].len();
        CamSet {
            class_count: rows.len(),
            locations,
            temperature,
            maps: rows.concat(),
        }
    }

    #[test]
    fn constant_features_give_uniform_cams() {
        let features = FeatureMap::new(3, 5, vec![0.7; 15]).unwrap();
        let classifier =
            Classifier::new(3, 4, (0..12).map(|i| i as f64 * 0.3 - 1.0).collect()).unwrap();
        let cams = compute_cam(&features, &classifier, 1.0).unwrap();
        for c in 0..4 {
            for &v in cams.row(c) {
                assert_abs_diff_eq!(v, 0.2, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn worked_cam_example() {
        let features = FeatureMap::new(1, 2, vec![LN2, 0.0]).unwrap();
        let classifier = Classifier::new(1, 1, vec![1.0]).unwrap();
        let cams = compute_cam(&features, &classifier, 1.0).unwrap();
        assert_abs_diff_eq!(cams.row(0)[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cams.row(0)[1], 1.0 / 3.0, epsilon = 1e-12);

        let sharp = compute_cam(&features, &classifier, 0.5).unwrap();
        assert_abs_diff_eq!(sharp.row(0)[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(sharp.row(0)[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn cam_rows_are_simplex_under_extreme_logits() {
        let features =
            FeatureMap::new(2, 4, vec![50.0, -50.0, 25.0, -25.0, -50.0, 50.0, 0.0, 10.0]).unwrap();
        let classifier = Classifier::new(2, 3, vec![1.0, -1.0, 0.5, -1.0, 1.0, 0.25]).unwrap();
        for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let cams = compute_cam(&features, &classifier, t).unwrap();
            for c in 0..3 {
                let sum: f64 = cams.row(c).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(cams.row(c).iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn bad_temperature_rejected() {
        let features = FeatureMap::new(1, 2, vec![0.0, 1.0]).unwrap();
        let classifier = Classifier::new(1, 1, vec![1.0]).unwrap();
        assert!(compute_cam(&features, &classifier, 0.0).is_err());
        assert!(compute_cam(&features, &classifier, -1.0).is_err());
    }

    #[test]
    fn ce_worked_values() {
        assert_abs_diff_eq!(loss_ce(&[1.0, 0.0], &[1.0, 0.0], 0).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            loss_ce(&[0.5, 0.5], &[0.5, 0.5], 0).unwrap(),
            2.0 * LN2,
            epsilon = 1e-12
        );
        let e_inv = (-1.0f64).exp();
        assert_abs_diff_eq!(
            loss_ce(&[1.0, 0.0], &[e_inv, 1.0 - e_inv], 0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ce_survives_zero_probability() {
        let v = loss_ce(&[0.0, 1.0], &[0.5, 0.5], 0).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn cam_jsd_worked_values() {
        let a = cam_from_rows(&[&[1.0, 0.0]], 1.0);
        let b = cam_from_rows(&[&[0.5, 0.5]], 1.0);
        assert_abs_diff_eq!(loss_cam(&a, &a, 0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            loss_cam(&a, &b, 0).unwrap(),
            0.215_761_554_338_835_67,
            epsilon = 1e-12
        );
        let c = cam_from_rows(&[&[0.0, 1.0]], 1.0);
        assert_abs_diff_eq!(loss_cam(&a, &c, 0).unwrap(), LN2, epsilon = 1e-12);
    }

    #[test]
    fn cam_jsd_is_symmetric() {
        let a = cam_from_rows(&[&[0.9, 0.1]], 1.0);
        let b = cam_from_rows(&[&[0.3, 0.7]], 1.0);
        assert_eq!(loss_cam(&a, &b, 0).unwrap(), loss_cam(&b, &a, 0).unwrap());
    }

    #[test]
    fn cam_mse_worked_values() {
        let a = cam_from_rows(&[&[1.0, 0.0]], 1.0);
        let b = cam_from_rows(&[&[0.0, 1.0]], 1.0);
        let c = cam_from_rows(&[&[0.5, 0.5]], 1.0);
        assert_eq!(loss_cam_mse(&a, &a, 0).unwrap(), 0.0);
        assert_abs_diff_eq!(loss_cam_mse(&a, &b, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(loss_cam_mse(&a, &c, 0).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn pred_jsd_worked_values() {
        assert_eq!(loss_pred_jsd(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            loss_pred_jsd(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            0.215_761_554_338_835_67,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            loss_pred_jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            LN2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn top_k_ordering_and_bounds() {
        let probs = [0.1, 0.4, 0.3, 0.2];
        let negs = top_k_negatives(&probs, 1, 3).unwrap();
        assert_eq!(negs.classes(), &[2, 3, 0]);
        assert!(top_k_negatives(&probs, 1, 4).is_err());
        assert!(top_k_negatives(&probs, 1, 0).is_err());
        // Ties break toward the lower index.
        let tied = top_k_negatives(&[0.25, 0.25, 0.25, 0.25], 3, 2).unwrap();
        assert_eq!(tied.classes(), &[0, 1]);
    }

    #[test]
    fn neg_loss_worked_values() {
        let uniform = cam_from_rows(&[&[0.5, 0.5], &[0.5, 0.5]], 1.0);
        let negs = NegativeSet { classes: vec![1] };
        assert_abs_diff_eq!(loss_neg(&uniform, &uniform, &negs).unwrap(), 0.0, epsilon = 1e-15);

        let peaked = cam_from_rows(&[&[0.5, 0.5], &[0.75, 0.25]], 1.0);
        assert_abs_diff_eq!(
            loss_neg(&peaked, &peaked, &negs).unwrap(),
            0.287_682_072_451_780_9,
            epsilon = 1e-12
        );

        let degenerate = cam_from_rows(&[&[0.5, 0.5], &[1.0, 0.0]], 1.0);
        let v = loss_neg(&degenerate, &degenerate, &negs).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn total_loss_assembly() {
        let r = total_loss(1.0, 0.2, 0.5, 0.06, ConsistencyMode::CamJsd).unwrap();
        assert_abs_diff_eq!(r.total, 1.042, epsilon = 1e-12);
        assert_abs_diff_eq!(r.total, r.ce + r.lambda * (r.cam + r.neg), epsilon = 1e-12);

        for mode in ConsistencyMode::ALL {
            let r = total_loss(1.0, 0.2, 0.5, 0.0, mode).unwrap();
            assert_eq!(r.total, 1.0);
        }
        let r = total_loss(1.0, 0.2, 0.5, 0.06, ConsistencyMode::None).unwrap();
        assert_eq!(r.total, 1.0);
        assert_eq!(r.cam, 0.0);
        assert_eq!(r.neg, 0.0);
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in ConsistencyMode::ALL {
            assert_eq!(mode.name().parse::<ConsistencyMode>().unwrap(), mode);
        }
        assert!("fancy".parse::<ConsistencyMode>().is_err());
    }

    #[test]
    fn temperature_sharpening_is_monotone() {
        let features = FeatureMap::new(
            2,
            6,
            vec![1.3, -0.2, 0.7, 0.1, -0.9, 0.4, 0.2, 1.1, -0.5, 0.8, 0.3, -1.2],
        )
        .unwrap();
        let classifier = Classifier::new(2, 2, vec![0.8, -0.3, 0.2, 0.9]).unwrap();
        let mut last_max = f64::INFINITY;
        let mut argmax = None;
        for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let cams = compute_cam(&features, &classifier, t).unwrap();
            let row = cams.row(0);
            let (idx, max) = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, v)| (i, *v))
                .unwrap();
            assert!(max <= last_max + 1e-12);
            if let Some(prev) = argmax {
                assert_eq!(prev, idx);
            }
            argmax = Some(idx);
            last_max = max;
        }
    }

    #[test]
    fn zero_lambda_gradient_equals_ce_gradient() {
        let features_a = FeatureMap::new(2, 3, vec![0.3, -0.1, 0.6, 0.2, 0.4, -0.5]).unwrap();
        let features_b = FeatureMap::new(2, 3, vec![-0.2, 0.1, 0.3, 0.7, -0.4, 0.2]).unwrap();
        let classifier = Classifier::new(2, 3, vec![0.5, -0.2, 0.1, 0.3, 0.6, -0.4]).unwrap();
        let with_lambda_zero = gradients(
            &features_a,
            &features_b,
            &classifier,
            1,
            LossSettings { lambda: 0.0, temperature: 1.0, k: 2, mode: ConsistencyMode::CamJsd },
        )
        .unwrap();
        let ce_only = gradients(
            &features_a,
            &features_b,
            &classifier,
            1,
            LossSettings { lambda: 0.3, temperature: 1.0, k: 2, mode: ConsistencyMode::None },
        )
        .unwrap();
        for (a, b) in with_lambda_zero.weights.iter().zip(&ce_only.weights) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in with_lambda_zero
            .features_clean
            .iter()
            .zip(&ce_only.features_clean)
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_branches_have_zero_cam_contribution() {
        let features =
            FeatureMap::new(2, 4, vec![0.3, -0.1, 0.6, 0.2, 0.4, -0.5, 0.1, 0.8]).unwrap();
        let classifier = Classifier::new(2, 3, vec![0.5, -0.2, 0.1, 0.3, 0.6, -0.4]).unwrap();
        // k = 0 disables the negative term, isolating the JSD contribution.
        let jsd_mode = gradients(
            &features,
            &features,
            &classifier,
            0,
            LossSettings { lambda: 0.7, temperature: 0.5, k: 0, mode: ConsistencyMode::CamJsd },
        )
        .unwrap();
        let ce_mode = gradients(
            &features,
            &features,
            &classifier,
            0,
            LossSettings { lambda: 0.7, temperature: 0.5, k: 0, mode: ConsistencyMode::None },
        )
        .unwrap();
        assert_abs_diff_eq!(jsd_mode.report.cam, 0.0, epsilon = 1e-15);
        for (a, b) in jsd_mode.weights.iter().zip(&ce_mode.weights) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
