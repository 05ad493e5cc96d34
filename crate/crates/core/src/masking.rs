//! Attention binarization, checkerboard (parity) refinement, and the
//! genome coordinate system over the surviving pixels.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::attention::AttentionMap;
use crate::image::Shape;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("mask data length {found} does not match {height}x{width}")]
    DataLength { height: usize, width: usize, found: usize },
}

/// One boolean per spatial position, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn empty(height: usize, width: usize) -> Self {
        PixelMask {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn full(height: usize, width: usize) -> Self {
        PixelMask {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self, MaskError> {
        if bits.len() != height * width {
            return Err(MaskError::DataLength {
                height,
                width,
                found: bits.len(),
            });
        }
        Ok(PixelMask { height, width, bits })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set positions as `(row, col)` in row-major order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / width, k % width))
    }

    pub fn is_subset_of(&self, other: &PixelMask) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Panics if the dimensions differ.
    pub fn intersection(&self, other: &PixelMask) -> PixelMask {
        assert_eq!((self.height, self.width), (other.height, other.width));
        PixelMask {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect(),
        }
    }
}

/// Which half of the checkerboard is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Parity {
    /// `(row + col)` even. Contains the top-left pixel.
    #[default]
    Even,
    Odd,
}

impl Parity {
    #[inline]
    pub fn admits(self, row: usize, col: usize) -> bool {
        let even = (row + col).is_multiple_of(2);
        match self {
            Parity::Even => even,
            Parity::Odd => !even,
        }
    }
}

/// A pixel is a candidate iff its attention value is nonzero.
pub fn binarize(map: &AttentionMap) -> PixelMask {
    PixelMask {
        height: map.height(),
        width: map.width(),
        bits: map.values().iter().map(|&u| u != 0).collect(),
    }
}

/// Keeps one pixel of every two horizontal or vertical neighbours: a set bit
/// survives only on the chosen checkerboard half.
pub fn parity_refine(mask: &PixelMask, parity: Parity) -> PixelMask {
    let width = mask.width;
    PixelMask {
        height: mask.height,
        width,
        bits: mask
            .bits
            .iter()
            .enumerate()
            .map(|(k, &b)| b && parity.admits(k / width, k % width))
            .collect(),
    }
}

pub fn checkerboard(height: usize, width: usize, parity: Parity) -> PixelMask {
    parity_refine(&PixelMask::full(height, width), parity)
}

/// Pixel coordinate of one decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
    pub channel: usize,
}

/// Bijection between genome slots and `(row, col, channel)` triples.
///
/// Slots follow row-major order (row, then column, then channel), and every
/// selected spatial position contributes all of its channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableIndex {
    shape: Shape,
    coords: Vec<Coord>,
    // image offset -> slot
    slots: Vec<Option<usize>>,
}

impl VariableIndex {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Genome dimension `d`.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    /// Panics if `slot >= self.len()`.
    #[inline]
    pub fn coord(&self, slot: usize) -> Coord {
        self.coords[slot]
    }

    pub fn slot(&self, coord: Coord) -> Option<usize> {
        if coord.row >= self.shape.height || coord.col >= self.shape.width || coord.channel >= self.shape.channels {
            return None;
        }
        self.slots[self.shape.offset(coord.row, coord.col, coord.channel)]
    }

    /// The spatial mask the index was built from.
    pub fn spatial_mask(&self) -> PixelMask {
        let mut mask = PixelMask::empty(self.shape.height, self.shape.width);
        for c in &self.coords {
            mask.set(c.row, c.col, true);
        }
        mask
    }
}

/// One variable per selected position and channel, in row-major order.
pub fn build_index(mask: &PixelMask, channels: usize) -> Result<VariableIndex, MaskError> {
    if channels != 1 && channels != 3 {
        return Err(MaskError::Channels(channels));
    }
    let shape = Shape::new(mask.height, mask.width, channels);
    let mut coords = Vec::with_capacity(mask.count() * channels);
    let mut slots = vec![None; shape.len()];
    for (row, col) in mask.positions() {
        for channel in 0..channels {
            slots[shape.offset(row, col, channel)] = Some(coords.len());
            coords.push(Coord { row, col, channel });
        }
    }
    Ok(VariableIndex { shape, coords, slots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarize_tests_zero_literally() {
        let map = AttentionMap::new(1, 3, vec![0, 1, 255]).unwrap();
        assert_eq!(binarize(&map).bits(), &[false, true, true]);
        assert!(binarize(&AttentionMap::new(2, 2, vec![0; 4]).unwrap()).is_empty());
    }

    #[test]
    fn full_four_by_four_keeps_eight_non_adjacent() {
        let refined = parity_refine(&PixelMask::full(4, 4), Parity::Even);
        // enumerate the checkerboard independently
        let mut expected = 0;
        for r in 0..4 {
            for c in 0..4 {
                if (r + c) % 2 == 0 {
                    expected += 1;
                    assert!(refined.get(r, c));
                } else {
                    assert!(!refined.get(r, c));
                }
            }
        }
        assert_eq!(refined.count(), expected);
        assert_eq!(expected, 8);
        for (r, c) in refined.positions() {
            if r + 1 < 4 {
                assert!(!refined.get(r + 1, c));
            }
            if c + 1 < 4 {
                assert!(!refined.get(r, c + 1));
            }
        }
    }

    #[test]
    fn empty_stays_empty() {
        assert!(parity_refine(&PixelMask::empty(5, 3), Parity::Even).is_empty());
        assert!(parity_refine(&PixelMask::empty(5, 3), Parity::Odd).is_empty());
    }

    #[test]
    fn one_based_diagonal_pixel_survives() {
        // (1,1) one-based is (0,0) zero-based; both coordinate sums are even
        let mut mask = PixelMask::empty(3, 3);
        mask.set(0, 0, true);
        assert_eq!(parity_refine(&mask, Parity::Even), mask);
        assert!(parity_refine(&mask, Parity::Odd).is_empty());
    }

    #[test]
    fn odd_and_even_partition_the_image() {
        let even = checkerboard(5, 7, Parity::Even);
        let odd = checkerboard(5, 7, Parity::Odd);
        assert_eq!(even.count(), 18);
        assert_eq!(odd.count(), 17);
        assert!(even.intersection(&odd).is_empty());
    }

    #[test]
    fn index_dimension_and_bijection() {
        let mask = checkerboard(4, 4, Parity::Even);
        let idx = build_index(&mask, 3).unwrap();
        assert_eq!(idx.len(), 24);
        for (i, &c) in idx.coords().iter().enumerate() {
            assert_eq!(idx.slot(c), Some(i));
        }
        assert_eq!(idx.slot(Coord { row: 0, col: 1, channel: 0 }), None);
        assert_eq!(idx.slot(Coord { row: 9, col: 0, channel: 0 }), None);
        assert!(idx.coords().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(idx.spatial_mask(), mask);
        assert_eq!(build_index(&mask, 3).unwrap(), idx);
        assert_eq!(build_index(&mask, 2), Err(MaskError::Channels(2)));
    }
}
