//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::io::Write;

use pixattack_core::Image;

use crate::FormatError;

/// Parses a P5 or P6 file. Comments (`#` to end of line) are accepted in
/// the header.
pub fn decode(bytes: &[u8]) -> Result<Image, FormatError> {
    let mut pos = 0;
    let magic = token(bytes, &mut pos)?;
    let channels = match magic.as_slice() {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(FormatError::Pnm("expected P5 or P6 magic".into())),
    };
    let width = number(bytes, &mut pos)?;
    let height = number(bytes, &mut pos)?;
    let maxval = number(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(FormatError::Pnm(format!("unsupported maxval {maxval}; only 255 is accepted")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(FormatError::Pnm("missing whitespace after header".into())),
    }
    let len = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| FormatError::Pnm("dimensions overflow".into()))?;
    let raster = &bytes[pos..];
    if raster.len() < len {
        return Err(FormatError::Pnm(format!(
            "truncated raster: expected {len} bytes, found {}",
            raster.len()
        )));
    }
    Ok(Image::new(height, width, channels, raster[..len].to_vec())?)
}

pub fn encode(image: &Image) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = Vec::with_capacity(image.data().len() + 20);
    write!(out, "{magic}\n{} {}\n255\n", image.width(), image.height()).expect("writing to a Vec cannot fail");
    out.extend_from_slice(image.data());
    out
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while let Some(&b) = bytes.get(*pos) {
        if b == b'#' {
            while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                *pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
}

fn token(bytes: &[u8], pos: &mut usize) -> Result<Vec<u8>, FormatError> {
    skip_space_and_comments(bytes, pos);
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
        *pos += 1;
    }
    if start == *pos {
        return Err(FormatError::Pnm("truncated header".into()));
    }
    Ok(bytes[start..*pos].to_vec())
}

fn number(bytes: &[u8], pos: &mut usize) -> Result<usize, FormatError> {
    let tok = token(bytes, pos)?;
    std::str::from_utf8(&tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| FormatError::Pnm(format!("bad header field {:?}", String::from_utf8_lossy(&tok))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_both_kinds() {
        for c in [1, 3] {
            let img = Image::new(2, 3, c, (0..6 * c as u8).collect()).unwrap();
            assert_eq!(decode(&encode(&img)).unwrap(), img);
        }
    }

    #[test]
    fn header_with_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1 # width height\n255\n".to_vec();
        bytes.extend([7, 9]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (1, 2, 1));
        assert_eq!(img.data(), &[7, 9]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(decode(b"P5\n2 2\n65535\n").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x01\x02").is_err());
        assert!(decode(b"P6\n2").is_err());
    }

    #[test]
    fn raster_may_start_with_whitespace_byte() {
        let mut bytes = b"P5 2 1 255\n".to_vec();
        bytes.extend(b" \n");
        assert_eq!(decode(&bytes).unwrap().data(), b" \n");
    }
}
