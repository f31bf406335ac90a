//! Cropping attack on a ciphertext and the damage it leaves after
//! decryption.

use crate::error::{CryptoError, Result};
use crate::image::GrayImage;

pub const WINDOW: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    /// Column of the left edge.
    pub x: usize,
    /// Row of the top edge.
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl std::str::FromStr for Rect {
    type Err = String;

    /// "x,y,w,h"
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        match v[..] {
            [x, y, w, h] => Ok(Rect { x, y, w, h }),
            _ => Err(format!("expected x,y,w,h, got {s:?}")),
        }
    }
}

/// Overwrites the rectangle with `fill`.
pub fn crop_attack(img: &GrayImage, rect: Rect, fill: u8) -> Result<GrayImage> {
    let n = img.n;
    if rect.x + rect.w > n || rect.y + rect.h > n {
        return Err(CryptoError::Bounds {
            x: rect.x,
            y: rect.y,
            w: rect.w,
            h: rect.h,
            n,
        });
    }
    let mut out = img.clone();
    for r in rect.y..rect.y + rect.h {
        for c in rect.x..rect.x + rect.w {
            out.set(r, c, fill);
        }
    }
    Ok(out)
}

/// Largest fraction of differing pixels over all 16×16 windows (the
/// whole image when it is smaller than a window).
pub fn dispersion_metric(reference: &GrayImage, damaged: &GrayImage) -> Result<f64> {
    if reference.n != damaged.n {
        return Err(CryptoError::Length(reference.n, damaged.n));
    }
    let n = reference.n;
    let w = WINDOW.min(n);
    // Summed-area table of the difference mask.
    let mut sat = vec![0u32; (n + 1) * (n + 1)];
    for r in 0..n {
        for c in 0..n {
            let d = (reference.get(r, c) != damaged.get(r, c)) as u32;
            sat[(r + 1) * (n + 1) + c + 1] = d + sat[r * (n + 1) + c + 1] + sat[(r + 1) * (n + 1) + c] - sat[r * (n + 1) + c];
        }
    }
    let mut worst = 0;
    for r in 0..=n - w {
        for c in 0..=n - w {
            let s = sat[(r + w) * (n + 1) + c + w] + sat[r * (n + 1) + c] - sat[r * (n + 1) + c + w] - sat[(r + w) * (n + 1) + c];
            worst = worst.max(s);
        }
    }
    Ok(worst as f64 / (w * w) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untouched_image_scores_zero() {
        let img = GrayImage::new(20, (0..400).map(|i| i as u8).collect()).unwrap();
        assert_eq!(dispersion_metric(&img, &img).unwrap(), 0.0);
    }

    #[test]
    fn solid_block_scores_one() {
        let img = GrayImage::filled(40, 9).unwrap();
        let hit = crop_attack(&img, Rect { x: 5, y: 10, w: 16, h: 16 }, 0).unwrap();
        assert_eq!(dispersion_metric(&img, &hit).unwrap(), 1.0);
        let small = crop_attack(&img, Rect { x: 0, y: 0, w: 8, h: 8 }, 0).unwrap();
        assert_eq!(dispersion_metric(&img, &small).unwrap(), 0.25);
    }

    #[test]
    fn bounds_and_parsing() {
        let img = GrayImage::filled(10, 0).unwrap();
        assert!(crop_attack(&img, Rect { x: 5, y: 0, w: 6, h: 1 }, 0).is_err());
        assert_eq!("1, 2,3,4".parse::<Rect>().unwrap(), Rect { x: 1, y: 2, w: 3, h: 4 });
        assert!("1,2,3".parse::<Rect>().is_err());
    }
}
