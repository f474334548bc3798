//! PNG heatmaps with two fixed color maps.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{CliError, Result};

type Rgb = [f64; 3];

const SEQUENTIAL: [Rgb; 5] = [
    [0.0, 0.0, 4.0],
    [87.0, 16.0, 110.0],
    [188.0, 55.0, 84.0],
    [249.0, 142.0, 9.0],
    [252.0, 255.0, 164.0],
];

const DIVERGING: [Rgb; 5] = [
    [5.0, 48.0, 97.0],
    [103.0, 169.0, 207.0],
    [247.0, 247.0, 247.0],
    [239.0, 138.0, 98.0],
    [103.0, 0.0, 31.0],
];

fn lookup(map: &[Rgb; 5], t: f64) -> [u8; 3] {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let x = t * (map.len() - 1) as f64;
    let i = (x.floor() as usize).min(map.len() - 2);
    let f = x - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (map[i][c] + f * (map[i + 1][c] - map[i][c])).round() as u8;
    }
    out
}

/// Sequential map scaled to `[0, max]`.
pub fn sequential(values: &[f64]) -> Vec<[u8; 3]> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    values
        .iter()
        .map(|v| lookup(&SEQUENTIAL, v * scale))
        .collect()
}

/// Diverging map with 0 at the neutral color and `±max|v|` at the ends.
pub fn diverging(values: &[f64]) -> Vec<[u8; 3]> {
    let max = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let scale = if max > 0.0 { 0.5 / max } else { 0.0 };
    values
        .iter()
        .map(|v| lookup(&DIVERGING, 0.5 + v * scale))
        .collect()
}

/// Writes an `n × n` image stored with row 0 at the bottom.
pub fn write_png(path: &Path, n: usize, pixels: &[[u8; 3]]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), n as u32, n as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut data = Vec::with_capacity(3 * n * n);
    for row in (0..n).rev() {
        for px in &pixels[row * n..(row + 1) * n] {
            data.extend_from_slice(px);
        }
    }
    let err = |e: png::EncodingError| CliError::io(path, std::io::Error::other(e));
    let mut w = enc.write_header().map_err(err)?;
    w.write_image_data(&data).map_err(err)?;
    w.finish().map_err(err)
}
