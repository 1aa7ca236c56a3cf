//! 8-bit binary PGM I/O and the built-in test phantom.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::linops::ImageDims;

/// Reads a binary (P5) PGM with `maxval <= 255`, rescaled to `[0, 255]`.
pub fn read_pgm(path: &Path) -> io::Result<(ImageDims, Vec<f64>)> {
    parse_pgm(&fs::read(path)?)
}

pub fn parse_pgm(bytes: &[u8]) -> io::Result<(ImageDims, Vec<f64>)> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("bad header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("only binary P5 PGM is supported"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PGM header number"));
    let (cols, rows, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM is supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = rows * cols;
    if bytes.len() < pos + n {
        return Err(bad("truncated PGM raster"));
    }
    let scale = 255.0 / maxval as f64;
    let data = bytes[pos..pos + n].iter().map(|&b| b as f64 * scale).collect();
    Ok((ImageDims::new(rows, cols), data))
}

/// Writes `image` as a P5 PGM, rounding and clamping to `[0, 255]`.
pub fn write_pgm(path: &Path, dims: ImageDims, image: &[f64]) -> io::Result<()> {
    let mut out = fs::File::create(path)?;
    out.write_all(&encode_pgm(dims, image))
}

pub fn encode_pgm(dims: ImageDims, image: &[f64]) -> Vec<u8> {
    assert_eq!(dims.len(), image.len(), "image size does not match dims");
    let mut bytes = format!("P5\n{} {}\n255\n", dims.cols, dims.rows).into_bytes();
    bytes.extend(image.iter().map(|&v| {
        let v = if v.is_nan() { 0.0 } else { v.round().clamp(0.0, 255.0) };
        v as u8
    }));
    bytes
}

/// Deterministic piecewise-constant test image with values in `[0, 255]`:
/// a head-like ellipse with inner regions, a bar and a few small discs.
pub fn phantom(side: usize) -> Vec<f64> {
    let s = side as f64;
    let mut img = vec![30.0; side * side];
    let ellipse = |r: f64, c: f64, cr: f64, cc: f64, ar: f64, ac: f64| {
        let dr = (r - cr) / ar;
        let dc = (c - cc) / ac;
        dr * dr + dc * dc <= 1.0
    };
    for row in 0..side {
        for col in 0..side {
            let r = (row as f64 + 0.5) / s;
            let c = (col as f64 + 0.5) / s;
            let mut v = 30.0;
            if ellipse(r, c, 0.5, 0.5, 0.42, 0.34) {
                v = 110.0;
            }
            if ellipse(r, c, 0.45, 0.5, 0.3, 0.24) {
                v = 160.0;
            }
            if ellipse(r, c, 0.38, 0.4, 0.06, 0.05) || ellipse(r, c, 0.38, 0.6, 0.06, 0.05) {
                v = 10.0;
            }
            if (0.6..0.68).contains(&r) && (0.38..0.62).contains(&c) {
                v = 230.0;
            }
            if (0.1..0.9).contains(&r) && (0.86..0.92).contains(&c) {
                v = 200.0;
            }
            if ellipse(r, c, 0.82, 0.5, 0.04, 0.04) {
                v = 255.0;
            }
            img[row * side + col] = v;
        }
    }
    img
}
