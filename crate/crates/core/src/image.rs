//! 8-bit images, sparse perturbations and the clamp/round repair that keeps
//! every attacked image inside the valid intensity box.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::masking::VariableIndex;
use crate::math;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("data length {found} does not match {height}x{width}x{channels}")]
    DataLength {
        height: usize,
        width: usize,
        channels: usize,
        found: usize,
    },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error("variable {index} is out of range for an index of {len} variables")]
    VariableOutOfRange { index: usize, len: usize },
    #[error("variable {0} appears more than once")]
    DuplicateVariable(usize),
    #[error("perturbation value for variable {0} is not finite")]
    NonFinite(usize),
}

/// Height, width and channel count of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Shape {
            height,
            width,
            channels,
        }
    }

    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of spatial positions.
    pub const fn area(&self) -> usize {
        self.height * self.width
    }

    /// Row-major offset of `(row, col, channel)`.
    #[inline]
    pub const fn offset(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }
}

impl core::fmt::Display for Shape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// A row-major `height × width × channels` image of 8-bit intensities.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    shape: Shape,
    data: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        let shape = Shape::new(height, width, channels);
        if data.len() != shape.len() {
            return Err(ImageError::DataLength {
                height,
                width,
                channels,
                found: data.len(),
            });
        }
        Ok(Image { shape, data })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> u8 {
        self.data[self.shape.offset(row, col, channel)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: u8) {
        let at = self.shape.offset(row, col, channel);
        self.data[at] = value;
    }
}

/// Perturbation values keyed by variable index; the index resolves to a
/// pixel coordinate through a [`VariableIndex`]. Variables that are not
/// listed are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparsePerturbation {
    entries: Vec<(usize, f64)>,
}

impl SparsePerturbation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a perturbation from `(variable, value)` pairs. Pairs are kept
    /// in ascending variable order.
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Result<Self, ImageError> {
        entries.sort_by_key(|&(i, _)| i);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ImageError::DuplicateVariable(w[0].0));
        }
        Ok(SparsePerturbation { entries })
    }

    /// One entry per genome slot, zeros included.
    pub fn from_genome(genome: &[f64]) -> Self {
        SparsePerturbation {
            entries: genome.iter().copied().enumerate().collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries with a nonzero value.
    pub fn support_len(&self) -> usize {
        self.entries.iter().filter(|&&(_, v)| v != 0.0).count()
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(self)
    }
}

fn check_index(image: &Image, pert: &SparsePerturbation, index: &VariableIndex) -> Result<(), ImageError> {
    if index.shape() != image.shape() {
        return Err(ImageError::ShapeMismatch {
            expected: image.shape(),
            found: index.shape(),
        });
    }
    if let Some(&(i, _)) = pert.entries.iter().find(|&&(i, _)| i >= index.len()) {
        return Err(ImageError::VariableOutOfRange { index: i, len: index.len() });
    }
    if let Some(&(i, _)) = pert.entries.iter().find(|&&(_, v)| !v.is_finite()) {
        return Err(ImageError::NonFinite(i));
    }
    Ok(())
}

#[inline]
fn repaired(u: u8, x: f64) -> u8 {
    math::round(f64::from(u) + x).clamp(0.0, 255.0) as u8
}

/// Adds `pert` to `image` at the coordinates given by `index`, rounding
/// half away from zero and clamping into `[0, 255]`.
pub fn apply_perturbation(
    image: &Image,
    pert: &SparsePerturbation,
    index: &VariableIndex,
) -> Result<Image, ImageError> {
    check_index(image, pert, index)?;
    let mut out = image.clone();
    let shape = image.shape();
    for &(i, x) in &pert.entries {
        let c = index.coord(i);
        let at = shape.offset(c.row, c.col, c.channel);
        out.data[at] = repaired(image.data[at], x);
    }
    Ok(out)
}

/// The integer change actually realised by [`apply_perturbation`] at every
/// listed variable. Zero entries are retained.
pub fn effective_perturbation(
    image: &Image,
    pert: &SparsePerturbation,
    index: &VariableIndex,
) -> Result<SparsePerturbation, ImageError> {
    check_index(image, pert, index)?;
    let shape = image.shape();
    let entries = pert
        .entries
        .iter()
        .map(|&(i, x)| {
            let c = index.coord(i);
            let u = image.data[shape.offset(c.row, c.col, c.channel)];
            (i, f64::from(repaired(u, x)) - f64::from(u))
        })
        .collect();
    Ok(SparsePerturbation { entries })
}

/// Euclidean norm of the listed values.
pub fn l2_norm(pert: &SparsePerturbation) -> f64 {
    math::sqrt(pert.entries.iter().map(|&(_, v)| v * v).sum())
}
