//! Square 8-bit grayscale images and the binary PGM (P5) format.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{CryptoError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub n: usize,
    /// Row-major, `pixels[row * n + col]`.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(n: usize, pixels: Vec<u8>) -> Result<Self> {
        if n < 2 || pixels.len() != n * n {
            return Err(CryptoError::Shape {
                width: n,
                height: pixels.len().checked_div(n).unwrap_or(0),
            });
        }
        Ok(Self { n, pixels })
    }

    pub fn filled(n: usize, value: u8) -> Result<Self> {
        Self::new(n, vec![value; n * n])
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.pixels[row * self.n + col] = v;
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut h = [0u64; 256];
        for &p in &self.pixels {
            h[p as usize] += 1;
        }
        h
    }

    /// Pearson correlation of horizontally adjacent pixel pairs.
    pub fn adjacent_correlation(&self) -> f64 {
        let pairs: Vec<(f64, f64)> = (0..self.n)
            .flat_map(|r| (0..self.n - 1).map(move |c| (r, c)))
            .map(|(r, c)| (self.get(r, c) as f64, self.get(r, c + 1) as f64))
            .collect();
        let k = pairs.len() as f64;
        let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / k, b + p.1 / k));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in &pairs {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx).powi(2);
            syy += (y - my).powi(2);
        }
        if sxx == 0.0 || syy == 0.0 {
            return 0.0;
        }
        sxy / (sxx * syy).sqrt()
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.n, self.n)?;
        w.write_all(&self.pixels)
    }

    pub fn read_pgm<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| CryptoError::Format(e.to_string()))?;
        Self::from_pgm_bytes(&buf)
    }

    pub fn from_pgm_bytes(buf: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < buf.len() && buf[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < buf.len() && buf[pos] == b'#' {
                while pos < buf.len() && buf[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(CryptoError::Format("truncated header".into()));
            }
            fields.push(String::from_utf8_lossy(&buf[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(CryptoError::Format(format!("magic {:?}, expected P5", fields[0])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| CryptoError::Format(format!("bad number {s:?}")));
        let (w, h, max) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if max != 255 {
            return Err(CryptoError::Format(format!("maxval {max}, only 255 supported")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let data = &buf[(pos + 1).min(buf.len())..];
        if data.len() != w * h {
            return Err(CryptoError::Format(format!("{} raster bytes for {w}x{h}", data.len())));
        }
        if w != h {
            return Err(CryptoError::Shape { width: w, height: h });
        }
        Self::new(w, data.to_vec())
    }
}

/// A smooth scene with a few soft-edged shapes and mild sensor noise,
/// standing in for a photograph: strong adjacent-pixel correlation and
/// large uniform regions.
pub fn synthetic_scene(n: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = qlink_core::rng::stream(seed, "scene");
    let nf = n as f64;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.1..0.9) * nf,
                rng.random_range(0.1..0.9) * nf,
                rng.random_range(0.08..0.25) * nf,
                rng.random_range(-90.0..90.0),
            )
        })
        .collect();
    let tilt = rng.random_range(0.0..std::f64::consts::TAU);
    let mut pixels = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let (x, y) = (c as f64, r as f64);
            let mut v = 110.0 + 50.0 * ((x * tilt.cos() + y * tilt.sin()) / nf * std::f64::consts::PI).sin();
            for &(cx, cy, rad, amp) in &blobs {
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                v += amp / (1.0 + ((d - rad) / 1.5).exp());
            }
            v += rng.random_range(-3.0..3.0);
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(n, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_with_comments() {
        let img = GrayImage::new(3, (0..9).map(|v| v * 20).collect()).unwrap();
        let mut bytes = Vec::new();
        img.write_pgm(&mut bytes).unwrap();
        assert_eq!(GrayImage::from_pgm_bytes(&bytes).unwrap(), img);
        let mut commented = b"P5\n# made by hand\n3 3\n255\n".to_vec();
        commented.extend_from_slice(&img.pixels);
        assert_eq!(GrayImage::from_pgm_bytes(&commented).unwrap(), img);
    }

    #[test]
    fn malformed_pgm_rejected() {
        assert!(GrayImage::from_pgm_bytes(b"P2\n2 2\n255\n1234").is_err());
        assert!(GrayImage::from_pgm_bytes(b"P5\n2 2\n255\n123").is_err());
        assert!(matches!(GrayImage::from_pgm_bytes(b"P5\n3 2\n255\n123456"), Err(CryptoError::Shape { .. })));
        assert!(GrayImage::from_pgm_bytes(b"P5\n2 2\n65535\n12345678").is_err());
        assert!(GrayImage::new(1, vec![0]).is_err());
    }

    #[test]
    fn scene_is_smooth() {
        let img = synthetic_scene(128, 1).unwrap();
        assert!(img.adjacent_correlation() > 0.9);
        assert_eq!(img, synthetic_scene(128, 1).unwrap());
    }
}
