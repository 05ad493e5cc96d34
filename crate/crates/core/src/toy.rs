//! Deterministic toy classifiers: a linear-softmax model and a small
//! convolution → ReLU → global-average-pool → linear network. The latter
//! doubles as the white-box proxy for class activation maps.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::image::{Image, Shape};
use crate::math;
use crate::oracle::{argmax, Concurrency, Oracle, OracleError, OracleResponse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("input shape mismatch: model expects {expected}, got {found}")]
    Shape { expected: Shape, found: Shape },
    #[error("model expects {expected} channels, got {found}")]
    Channels { expected: usize, found: usize },
    #[error("{name} has {found} values, expected {expected}")]
    Length {
        name: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid model parameter: {0}")]
    Parameter(&'static str),
}

/// Class count of the built-in toy models.
pub const TOY_CLASSES: usize = 10;
/// Logit scale of the seeded linear target; clean exemplars land around
/// 0.8 confidence.
pub const TOY_TARGET_GAIN: f64 = 1.0;
pub const EXEMPLAR_AMPLITUDE: f64 = 20.0;
pub const EXEMPLAR_NOISE: f64 = 20.0;

/// Architecture of the built-in proxy: 8 filters of 3×3, stride 4.
pub fn toy_proxy_spec(in_channels: usize, classes: usize) -> ConvGapSpec {
    ConvGapSpec {
        in_channels,
        classes,
        filters: 8,
        kernel: 3,
        stride: 4,
    }
}

fn check_len(name: &'static str, values: &[f64], expected: usize) -> Result<(), ModelError> {
    if values.len() != expected {
        return Err(ModelError::Length {
            name,
            expected,
            found: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Parameter("non-finite weight"));
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| math::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[inline]
fn normalized(v: u8) -> f64 {
    f64::from(v) / 255.0
}

/// `softmax(W · (x/255 − ½) + b)` over a fixed input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmax {
    shape: Shape,
    classes: usize,
    // classes × shape.len(), row per class
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearSoftmax {
    pub fn new(shape: Shape, classes: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self, ModelError> {
        if classes == 0 {
            return Err(ModelError::Parameter("at least one class is required"));
        }
        if shape.channels != 1 && shape.channels != 3 {
            return Err(ModelError::Parameter("channels must be 1 or 3"));
        }
        check_len("weights", &weights, classes * shape.len())?;
        check_len("bias", &bias, classes)?;
        Ok(LinearSoftmax {
            shape,
            classes,
            weights,
            bias,
        })
    }

    /// Weights uniform in `±gain·√(3/n)` (unit logit variance for
    /// uniform inputs at `gain = 2√3`), zero bias.
    pub fn seeded(shape: Shape, classes: usize, gain: f64, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.len().max(1);
        let scale = gain * math::sqrt(3.0 / n as f64);
        let weights = (0..classes * shape.len())
            .map(|_| rng.random_range(-1.0..=1.0) * scale)
            .collect();
        Self::new(shape, classes, weights, vec![0.0; classes])
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn class_weights(&self, class: usize) -> &[f64] {
        let n = self.shape.len();
        &self.weights[class * n..(class + 1) * n]
    }

    pub fn logits(&self, image: &Image) -> Result<Vec<f64>, ModelError> {
        if image.shape() != self.shape {
            return Err(ModelError::Shape {
                expected: self.shape,
                found: image.shape(),
            });
        }
        let x: Vec<f64> = image.data().iter().map(|&v| normalized(v) - 0.5).collect();
        Ok((0..self.classes)
            .map(|k| {
                self.bias[k]
                    + self
                        .class_weights(k)
                        .iter()
                        .zip(&x)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn probabilities(&self, image: &Image) -> Result<Vec<f64>, ModelError> {
        Ok(softmax(&self.logits(image)?))
    }

    /// A synthetic image the model should assign to `class`: mid-gray
    /// pushed by `amplitude` along the sign of the class's weight margin
    /// over the mean class, plus uniform noise of width `±noise`.
    pub fn class_exemplar<R: Rng + ?Sized>(&self, class: usize, amplitude: f64, noise: f64, rng: &mut R) -> Image {
        let n = self.shape.len();
        let own = self.class_weights(class);
        let data = (0..n)
            .map(|i| {
                let mean = (0..self.classes).map(|k| self.weights[k * n + i]).sum::<f64>() / self.classes as f64;
                let dir = if own[i] >= mean { 1.0 } else { -1.0 };
                let jitter = if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 };
                math::round(127.5 + amplitude * dir + jitter).clamp(0.0, 255.0) as u8
            })
            .collect();
        Image::new(self.shape.height, self.shape.width, self.shape.channels, data)
            .expect("shape validated at construction")
    }
}

/// Stack of feature maps on the convolution output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    count: usize,
    height: usize,
    width: usize,
    // count × height × width
    data: Vec<f64>,
}

impl FeatureMaps {
    pub fn new(count: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        check_len("feature maps", &data, count * height * width)?;
        Ok(FeatureMaps {
            count,
            height,
            width,
            data,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn map(&self, k: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[k * n..(k + 1) * n]
    }

    /// Spatial mean of every map.
    pub fn pooled(&self) -> Vec<f64> {
        let n = (self.height * self.width).max(1) as f64;
        (0..self.count).map(|k| self.map(k).iter().sum::<f64>() / n).collect()
    }
}

/// Convolution (odd square kernels, zero "same" padding, stride `s`) →
/// ReLU → global average pooling → linear → softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGap {
    in_channels: usize,
    classes: usize,
    filters: usize,
    kernel: usize,
    stride: usize,
    // filters × in_channels × kernel × kernel
    filter_weights: Vec<f64>,
    filter_bias: Vec<f64>,
    // filters × classes: weight of feature k for class c at k·classes + c
    class_weights: Vec<f64>,
    class_bias: Vec<f64>,
}

/// Architecture of a [`ConvGap`] network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGapSpec {
    pub in_channels: usize,
    pub classes: usize,
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvGap {
    pub fn new(
        spec: ConvGapSpec,
        filter_weights: Vec<f64>,
        filter_bias: Vec<f64>,
        class_weights: Vec<f64>,
        class_bias: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let ConvGapSpec {
            in_channels,
            classes,
            filters,
            kernel,
            stride,
        } = spec;
        if in_channels != 1 && in_channels != 3 {
            return Err(ModelError::Parameter("channels must be 1 or 3"));
        }
        if classes == 0 || filters == 0 {
            return Err(ModelError::Parameter("classes and filters must be positive"));
        }
        if kernel % 2 == 0 {
            return Err(ModelError::Parameter("kernel size must be odd"));
        }
        if stride == 0 {
            return Err(ModelError::Parameter("stride must be positive"));
        }
        check_len("filter weights", &filter_weights, filters * in_channels * kernel * kernel)?;
        check_len("filter bias", &filter_bias, filters)?;
        check_len("class weights", &class_weights, filters * classes)?;
        check_len("class bias", &class_bias, classes)?;
        Ok(ConvGap {
            in_channels,
            classes,
            filters,
            kernel,
            stride,
            filter_weights,
            filter_bias,
            class_weights,
            class_bias,
        })
    }

    /// He-style uniform filters and class weights drawn from `seed`.
    pub fn seeded(spec: ConvGapSpec, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan_in = (spec.in_channels * spec.kernel * spec.kernel).max(1) as f64;
        let a = math::sqrt(6.0 / fan_in);
        let filter_weights = (0..spec.filters * spec.in_channels * spec.kernel * spec.kernel)
            .map(|_| rng.random_range(-a..=a))
            .collect();
        let filter_bias = (0..spec.filters).map(|_| rng.random_range(-0.1..=0.1)).collect();
        let b = math::sqrt(6.0 / spec.filters.max(1) as f64);
        let class_weights = (0..spec.filters * spec.classes)
            .map(|_| rng.random_range(-b..=b))
            .collect();
        Self::new(spec, filter_weights, filter_bias, class_weights, vec![0.0; spec.classes])
    }

    pub fn spec(&self) -> ConvGapSpec {
        ConvGapSpec {
            in_channels: self.in_channels,
            classes: self.classes,
            filters: self.filters,
            kernel: self.kernel,
            stride: self.stride,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn filter_weights(&self) -> &[f64] {
        &self.filter_weights
    }

    pub fn filter_bias(&self) -> &[f64] {
        &self.filter_bias
    }

    pub fn class_weights(&self) -> &[f64] {
        &self.class_weights
    }

    pub fn class_bias(&self) -> &[f64] {
        &self.class_bias
    }

    /// Weight of every feature map for `class`.
    pub fn weights_for_class(&self, class: usize) -> Vec<f64> {
        (0..self.filters)
            .map(|k| self.class_weights[k * self.classes + class])
            .collect()
    }

    /// Feature-grid size for an `height × width` input.
    pub fn grid(&self, height: usize, width: usize) -> (usize, usize) {
        (height.div_ceil(self.stride), width.div_ceil(self.stride))
    }

    /// Rectified convolution outputs.
    pub fn features(&self, image: &Image) -> Result<FeatureMaps, ModelError> {
        if image.channels() != self.in_channels {
            return Err(ModelError::Channels {
                expected: self.in_channels,
                found: image.channels(),
            });
        }
        let (h, w) = (image.height(), image.width());
        let (gh, gw) = self.grid(h, w);
        let r = (self.kernel / 2) as isize;
        let k = self.kernel;
        let c_in = self.in_channels;
        let mut data = vec![0.0; self.filters * gh * gw];
        for f in 0..self.filters {
            let fw = &self.filter_weights[f * c_in * k * k..(f + 1) * c_in * k * k];
            for gi in 0..gh {
                for gj in 0..gw {
                    let (ci, cj) = ((gi * self.stride) as isize, (gj * self.stride) as isize);
                    let mut acc = self.filter_bias[f];
                    for dy in 0..k {
                        let y = ci + dy as isize - r;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for dx in 0..k {
                            let x = cj + dx as isize - r;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            for c in 0..c_in {
                                acc += fw[(c * k + dy) * k + dx] * normalized(image.get(y as usize, x as usize, c));
                            }
                        }
                    }
                    data[(f * gh + gi) * gw + gj] = acc.max(0.0);
                }
            }
        }
        Ok(FeatureMaps {
            count: self.filters,
            height: gh,
            width: gw,
            data,
        })
    }

    pub fn logits_from_features(&self, features: &FeatureMaps) -> Vec<f64> {
        let pooled = features.pooled();
        (0..self.classes)
            .map(|c| {
                self.class_bias[c]
                    + pooled
                        .iter()
                        .enumerate()
                        .map(|(k, g)| self.class_weights[k * self.classes + c] * g)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn logits(&self, image: &Image) -> Result<Vec<f64>, ModelError> {
        Ok(self.logits_from_features(&self.features(image)?))
    }

    pub fn probabilities(&self, image: &Image) -> Result<Vec<f64>, ModelError> {
        Ok(softmax(&self.logits(image)?))
    }

    pub fn predict(&self, image: &Image) -> Result<usize, ModelError> {
        Ok(argmax(&self.logits(image)?))
    }
}

/// In-process stand-in for a target classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum ToyModel {
    Linear(LinearSoftmax),
    ConvGap(ConvGap),
}

impl ToyModel {
    pub fn probabilities(&self, image: &Image) -> Result<Vec<f64>, ModelError> {
        match self {
            ToyModel::Linear(m) => m.probabilities(image),
            ToyModel::ConvGap(m) => m.probabilities(image),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            ToyModel::Linear(m) => m.classes(),
            ToyModel::ConvGap(m) => m.classes(),
        }
    }
}

impl From<ModelError> for OracleError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Shape { expected, found } => OracleError::ShapeMismatch { expected, found },
            other => OracleError::Malformed(alloc::format!("{other}")),
        }
    }
}

fn respond(probabilities: Vec<f64>) -> Result<OracleResponse, OracleError> {
    OracleResponse::new(probabilities)
}

impl Oracle for LinearSoftmax {
    fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError> {
        respond(self.probabilities(image)?)
    }

    fn input_shape(&self) -> Option<Shape> {
        Some(self.shape)
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Parallel { max_in_flight: usize::MAX }
    }
}

impl Oracle for ConvGap {
    fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError> {
        respond(self.probabilities(image)?)
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Parallel { max_in_flight: usize::MAX }
    }
}

impl Oracle for ToyModel {
    fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError> {
        respond(self.probabilities(image)?)
    }

    fn input_shape(&self) -> Option<Shape> {
        match self {
            ToyModel::Linear(m) => Some(m.shape()),
            ToyModel::ConvGap(_) => None,
        }
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Parallel { max_in_flight: usize::MAX }
    }
}
