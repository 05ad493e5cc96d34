//! Class activation maps from the conv-GAP proxy.
//!
//! For the proxy's top-1 class `c*`, the raw map is `Σ_k w[k][c*] · F_k`
//! on the feature grid. It is rectified, upsampled to the image grid and
//! affinely rescaled to `0..=255`, so that zero in the 8-bit map means
//! "no positive evidence at all".

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::image::Image;
use crate::math;
use crate::toy::{ConvGap, FeatureMaps, ModelError};

/// The white-box model used to derive attention maps.
pub type ProxyModel = ConvGap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttentionError {
    #[error("attention data length {found} does not match {height}x{width}")]
    DataLength { height: usize, width: usize, found: usize },
    #[error("attention map is {found_h}x{found_w}, image is {height}x{width}")]
    SizeMismatch {
        height: usize,
        width: usize,
        found_h: usize,
        found_w: usize,
    },
    #[error("{found} class weights for {expected} feature maps")]
    WeightCount { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Single-channel 8-bit saliency over the image's spatial grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttentionMap {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl AttentionMap {
    pub fn new(height: usize, width: usize, values: Vec<u8>) -> Result<Self, AttentionError> {
        if values.len() != height * width {
            return Err(AttentionError::DataLength {
                height,
                width,
                found: values.len(),
            });
        }
        Ok(AttentionMap { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.width + col]
    }

    /// Errors unless the map covers exactly `image`'s spatial grid.
    pub fn check_matches(&self, image: &Image) -> Result<(), AttentionError> {
        if (self.height, self.width) != (image.height(), image.width()) {
            return Err(AttentionError::SizeMismatch {
                height: image.height(),
                width: image.width(),
                found_h: self.height,
                found_w: self.width,
            });
        }
        Ok(())
    }
}

/// Feature-grid to image-grid interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Upsampling {
    #[default]
    Bilinear,
    Nearest,
}

/// Resamples a `src_h × src_w` grid to `dst_h × dst_w` using pixel-centre
/// alignment.
pub fn upsample(src: &[f64], src_h: usize, src_w: usize, dst_h: usize, dst_w: usize, mode: Upsampling) -> Vec<f64> {
    let mut out = vec![0.0; dst_h * dst_w];
    if src_h == 0 || src_w == 0 {
        return out;
    }
    let sy = src_h as f64 / dst_h.max(1) as f64;
    let sx = src_w as f64 / dst_w.max(1) as f64;
    for i in 0..dst_h {
        for j in 0..dst_w {
            out[i * dst_w + j] = match mode {
                Upsampling::Nearest => {
                    let y = (math::floor((i as f64 + 0.5) * sy) as usize).min(src_h - 1);
                    let x = (math::floor((j as f64 + 0.5) * sx) as usize).min(src_w - 1);
                    src[y * src_w + x]
                }
                Upsampling::Bilinear => {
                    let fy = ((i as f64 + 0.5) * sy - 0.5).clamp(0.0, (src_h - 1) as f64);
                    let fx = ((j as f64 + 0.5) * sx - 0.5).clamp(0.0, (src_w - 1) as f64);
                    let (y0, x0) = (math::floor(fy) as usize, math::floor(fx) as usize);
                    let (y1, x1) = ((y0 + 1).min(src_h - 1), (x0 + 1).min(src_w - 1));
                    let (ty, tx) = (fy - y0 as f64, fx - x0 as f64);
                    let top = src[y0 * src_w + x0] * (1.0 - tx) + src[y0 * src_w + x1] * tx;
                    let bottom = src[y1 * src_w + x0] * (1.0 - tx) + src[y1 * src_w + x1] * tx;
                    top * (1.0 - ty) + bottom * ty
                }
            };
        }
    }
    out
}

/// Maps min → 0 and max → 255 with rounding. An all-zero input stays
/// zero; a constant positive input becomes all 255.
pub fn rescale_to_u8(values: &[f64]) -> Vec<u8> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() || max <= 0.0 {
        return vec![0; values.len()];
    }
    if max == min {
        return vec![255; values.len()];
    }
    values
        .iter()
        .map(|&v| math::round((v - min) / (max - min) * 255.0).clamp(0.0, 255.0) as u8)
        .collect()
}

/// CAM for an explicit set of feature maps and per-map weights.
pub fn cam_from_features(
    features: &FeatureMaps,
    weights: &[f64],
    height: usize,
    width: usize,
    mode: Upsampling,
) -> Result<AttentionMap, AttentionError> {
    if weights.len() != features.count() {
        return Err(AttentionError::WeightCount {
            expected: features.count(),
            found: weights.len(),
        });
    }
    let cells = features.height() * features.width();
    let mut raw = vec![0.0; cells];
    for (k, &w) in weights.iter().enumerate() {
        for (acc, &f) in raw.iter_mut().zip(features.map(k)) {
            *acc += w * f;
        }
    }
    for v in &mut raw {
        *v = v.max(0.0);
    }
    let up = upsample(&raw, features.height(), features.width(), height, width, mode);
    AttentionMap::new(height, width, rescale_to_u8(&up))
}

/// Attention map of `image` for the proxy's own top-1 class.
pub fn compute_cam(proxy: &ProxyModel, image: &Image, mode: Upsampling) -> Result<AttentionMap, AttentionError> {
    let features = proxy.features(image)?;
    let top = crate::oracle::argmax(&proxy.logits_from_features(&features));
    cam_from_features(&features, &proxy.weights_for_class(top), image.height(), image.width(), mode)
}
