//! Perturbation-pattern rendering.
//!
//! Pixels outside the attack mask are light gray, mask pixels left
//! untouched are dark gray, and changed pixels show `128 + clamp(x, −127,
//! 127)` per channel, so brighter means the value went up.

use pixattack_core::{Image, PixelMask};

use crate::export::PixelDelta;
use crate::FormatError;

pub const OUTSIDE_MASK: u8 = 200;
pub const UNCHANGED: u8 = 80;

fn channel_level(x: f64) -> u8 {
    (128.0 + x.clamp(-127.0, 127.0)) as u8
}

/// Renders the pattern of `deltas`, which are effective changes (already
/// rounded and clamped against `original`; see [`crate::export::apply_deltas`]).
///
/// A changed pixel whose rendered channels would all equal one of the two
/// gray levels is moved one step toward 128, so the two grays mark
/// exactly the unchanged pixels.
pub fn render_pattern(original: &Image, mask: &PixelMask, deltas: &[PixelDelta]) -> Result<Image, FormatError> {
    let (h, w, c) = (original.height(), original.width(), original.channels());
    if (mask.height(), mask.width()) != (h, w) {
        return Err(FormatError::SizeMismatch {
            expected: (h, w),
            found: (mask.height(), mask.width()),
        });
    }
    let mut values = vec![0.0f64; h * w * c];
    for d in deltas {
        if d.row >= h || d.col >= w || d.channel >= c {
            return Err(FormatError::OutOfImage {
                row: d.row,
                col: d.col,
                channel: d.channel,
            });
        }
        if !mask.get(d.row, d.col) && d.value != 0.0 {
            return Err(FormatError::OutsideMask { row: d.row, col: d.col });
        }
        values[(d.row * w + d.col) * c + d.channel] += d.value;
    }

    let mut out = Image::filled(h, w, c, OUTSIDE_MASK)?;
    for r in 0..h {
        for col in 0..w {
            if !mask.get(r, col) {
                continue;
            }
            let px = &values[(r * w + col) * c..(r * w + col + 1) * c];
            if px.iter().all(|&v| v == 0.0) {
                for ch in 0..c {
                    out.set(r, col, ch, UNCHANGED);
                }
                continue;
            }
            let mut levels: Vec<u8> = px.iter().map(|&v| channel_level(v)).collect();
            if let Some(&first) = levels.first() {
                if (first == UNCHANGED || first == OUTSIDE_MASK) && levels.iter().all(|&l| l == first) {
                    let nudged = if first < 128 { first + 1 } else { first - 1 };
                    levels.iter_mut().for_each(|l| *l = nudged);
                }
            }
            for (ch, &l) in levels.iter().enumerate() {
                out.set(r, col, ch, l);
            }
        }
    }
    Ok(out)
}

/// Positions whose rendered pixel is neither gray level.
pub fn rendered_support(pattern: &Image) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..pattern.height() {
        for c in 0..pattern.width() {
            let px: Vec<u8> = (0..pattern.channels()).map(|ch| pattern.get(r, c, ch)).collect();
            let gray = |g: u8| px.iter().all(|&v| v == g);
            if !gray(UNCHANGED) && !gray(OUTSIDE_MASK) {
                out.push((r, c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(row: usize, col: usize, channel: usize, value: f64) -> PixelDelta {
        PixelDelta { row, col, channel, value }
    }

    #[test]
    fn empty_perturbation_on_full_mask_is_dark_gray() {
        let img = Image::filled(3, 4, 3, 9).unwrap();
        let out = render_pattern(&img, &PixelMask::full(3, 4), &[]).unwrap();
        assert!(out.data().iter().all(|&v| v == UNCHANGED));
    }

    #[test]
    fn extreme_positive_change_renders_white() {
        let img = Image::filled(2, 2, 1, 0).unwrap();
        let out = render_pattern(&img, &PixelMask::full(2, 2), &[delta(1, 1, 0, 127.0)]).unwrap();
        assert_eq!(out.get(1, 1, 0), 255);
        assert_eq!(out.get(0, 0, 0), UNCHANGED);
    }

    #[test]
    fn outside_mask_is_light_gray_and_collisions_are_nudged() {
        let img = Image::filled(1, 3, 1, 100).unwrap();
        let mask = PixelMask::from_bits(1, 3, vec![true, true, false]).unwrap();
        let out = render_pattern(&img, &mask, &[delta(0, 0, 0, -48.0), delta(0, 1, 0, 72.0)]).unwrap();
        assert_eq!(out.data(), &[81, 199, OUTSIDE_MASK]);
        assert_eq!(rendered_support(&out), vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn rejects_inconsistent_inputs() {
        let img = Image::filled(2, 2, 1, 0).unwrap();
        assert!(render_pattern(&img, &PixelMask::full(3, 2), &[]).is_err());
        let mask = PixelMask::from_bits(2, 2, vec![true, false, false, false]).unwrap();
        assert!(render_pattern(&img, &mask, &[delta(1, 1, 0, 3.0)]).is_err());
        assert!(render_pattern(&img, &mask, &[delta(0, 0, 1, 3.0)]).is_err());
    }
}
