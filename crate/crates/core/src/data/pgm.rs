use std::path::Path;

use crate::error::{Error, Result};

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    /// Box-filter downscale to `width x height`.
    pub fn resize_area(&self, width: usize, height: usize) -> GrayImage {
        let mut pixels = vec![0.0; width * height];
        for y in 0..height {
            let y0 = y * self.height / height;
            let y1 = ((y + 1) * self.height).div_ceil(height).max(y0 + 1).min(self.height);
            for x in 0..width {
                let x0 = x * self.width / width;
                let x1 = ((x + 1) * self.width).div_ceil(width).max(x0 + 1).min(self.width);
                let mut sum = 0.0;
                for yy in y0..y1 {
                    for xx in x0..x1 {
                        sum += self.pixels[yy * self.width + xx];
                    }
                }
                pixels[y * width + x] = sum / ((y1 - y0) * (x1 - x0)) as f64;
            }
        }
        GrayImage { width, height, pixels }
    }
}

/// Reads a binary (P5) PGM with 8- or 16-bit samples.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::Data(format!("{}: {what}", path.display()));
    let mut pos = 0;
    let mut token = || -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token().as_deref() != Some("P5") {
        return Err(bad("not a binary PGM (P5)"));
    }
    let mut num = |what: &str| -> Result<usize> { token().and_then(|t| t.parse().ok()).ok_or_else(|| bad(what)) };
    let width = num("bad width")?;
    let height = num("bad height")?;
    let maxval = num("bad maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval out of range"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let sample = if maxval < 256 { 1 } else { 2 };
    let need = width * height * sample;
    if bytes.len() < start + need {
        return Err(bad("truncated raster"));
    }
    let raster = &bytes[start..start + need];
    let pixels = if sample == 1 {
        raster.iter().map(|&b| b as f64 / maxval as f64).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / maxval as f64)
            .collect()
    };
    Ok(GrayImage { width, height, pixels })
}

/// Writes an 8-bit binary PGM, clamping intensities into `[0, 1]`.
pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    let mut buf = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    buf.extend(image.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
