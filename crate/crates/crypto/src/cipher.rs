//! Confusion–diffusion image cipher: pixel positions are shuffled by a
//! discretized Chirikov standard map, pixel values are chained with key
//! bytes in scan order.

use crate::error::Result;
use crate::image::GrayImage;
use crate::keystream::KeyStream;

pub const CONFUSION_ROUNDS: usize = 3;
pub const DIFFUSION_ROUNDS: usize = 2;
pub const CONFUSION_SEED_BITS: usize = 16;

/// Key bits consumed by `encrypt` on an n×n image.
pub fn key_budget(n: usize) -> usize {
    CONFUSION_SEED_BITS + DIFFUSION_ROUNDS * (8 + 8 * n * n)
}

/// round(s_c·sin(2πα/N)), halves rounded up.
fn kick(s_c: u32, alpha: usize, n: usize) -> i64 {
    let x = s_c as f64 * (std::f64::consts::TAU * alpha as f64 / n as f64).sin();
    (x + 0.5).floor() as i64
}

fn wrap(x: i64, n: usize) -> usize {
    x.rem_euclid(n as i64) as usize
}

/// Pixel (a, o) moves to (α, β) = ((a+o) mod N, (o + kick(α)) mod N).
pub fn confuse(img: &GrayImage, s_c: u32) -> GrayImage {
    let n = img.n;
    let kicks: Vec<i64> = (0..n).map(|al| kick(s_c, al, n)).collect();
    let mut out = img.clone();
    for a in 0..n {
        for o in 0..n {
            let alpha = (a + o) % n;
            let beta = wrap(o as i64 + kicks[alpha], n);
            out.set(alpha, beta, img.get(a, o));
        }
    }
    out
}

pub fn confuse_inverse(img: &GrayImage, s_c: u32) -> GrayImage {
    let n = img.n;
    let kicks: Vec<i64> = (0..n).map(|al| kick(s_c, al, n)).collect();
    let mut out = img.clone();
    for alpha in 0..n {
        for beta in 0..n {
            let a = wrap(alpha as i64 - beta as i64 + kicks[alpha], n);
            let o = wrap(beta as i64 - kicks[alpha], n);
            out.set(a, o, img.get(alpha, beta));
        }
    }
    out
}

/// Row-major chaining: e = b ⊕ ((p + b) mod 256) ⊕ previous e, seeded
/// with `s_d`. One key byte per pixel.
pub fn diffuse(img: &GrayImage, key: &mut KeyStream, s_d: u8) -> Result<GrayImage> {
    key.require(8 * img.pixels.len())?;
    let mut out = img.clone();
    let mut prev = s_d;
    for p in out.pixels.iter_mut() {
        let b = key.fetch_byte()?;
        let e = b ^ p.wrapping_add(b) ^ prev;
        *p = e;
        prev = e;
    }
    Ok(out)
}

pub fn diffuse_inverse(img: &GrayImage, key: &mut KeyStream, s_d: u8) -> Result<GrayImage> {
    key.require(8 * img.pixels.len())?;
    let mut out = img.clone();
    let mut prev = s_d;
    for p in out.pixels.iter_mut() {
        let b = key.fetch_byte()?;
        let e = *p;
        *p = (b ^ e ^ prev).wrapping_sub(b);
        prev = e;
    }
    Ok(out)
}

/// Three confusion rounds, then two rounds of diffusion followed by
/// confusion. The confusion seed is read once and reused.
pub fn encrypt(img: &GrayImage, key: &mut KeyStream) -> Result<GrayImage> {
    key.require(key_budget(img.n))?;
    let s_c = key.fetch(CONFUSION_SEED_BITS)?;
    let mut t = img.clone();
    for _ in 0..CONFUSION_ROUNDS {
        t = confuse(&t, s_c);
    }
    for _ in 0..DIFFUSION_ROUNDS {
        let s_d = key.fetch_byte()?;
        t = diffuse(&t, key, s_d)?;
        t = confuse(&t, s_c);
    }
    Ok(t)
}

/// Mirror of `encrypt`, consuming the same key bits.
pub fn decrypt(img: &GrayImage, key: &mut KeyStream) -> Result<GrayImage> {
    key.require(key_budget(img.n))?;
    let start = key.position();
    let s_c = key.fetch(CONFUSION_SEED_BITS)?;
    let round_bits = 8 + 8 * img.n * img.n;
    let mut t = img.clone();
    for round in (0..DIFFUSION_ROUNDS).rev() {
        key.seek(start + CONFUSION_SEED_BITS + round * round_bits)?;
        let s_d = key.fetch_byte()?;
        t = confuse_inverse(&t, s_c);
        t = diffuse_inverse(&t, key, s_d)?;
    }
    for _ in 0..CONFUSION_ROUNDS {
        t = confuse_inverse(&t, s_c);
    }
    key.seek(start + key_budget(img.n))?;
    Ok(t)
}

/// Baseline: each pixel XORed with one key byte. Its own inverse.
pub fn xor_cipher(img: &GrayImage, key: &mut KeyStream) -> Result<GrayImage> {
    key.require(8 * img.pixels.len())?;
    let mut out = img.clone();
    for p in out.pixels.iter_mut() {
        *p ^= key.fetch_byte()?;
    }
    Ok(out)
}
