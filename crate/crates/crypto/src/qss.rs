//! Three-party secret sharing by chaining two pairwise keys: the dealer
//! publishes M ⊕ K_ab ⊕ K_ac, and only the two players together can
//! remove both keys.

use crate::error::{CryptoError, Result};

fn xor3(x: &[u8], k1: &[u8], k2: &[u8]) -> Result<Vec<u8>> {
    if x.len() != k1.len() {
        return Err(CryptoError::Length(x.len(), k1.len()));
    }
    if x.len() != k2.len() {
        return Err(CryptoError::Length(x.len(), k2.len()));
    }
    Ok(x.iter().zip(k1).zip(k2).map(|((a, b), c)| (a ^ b ^ c) & 1).collect())
}

pub fn qss_encrypt(message: &[u8], key_ab: &[u8], key_ac: &[u8]) -> Result<Vec<u8>> {
    xor3(message, key_ab, key_ac)
}

pub fn qss_reconstruct(cipher: &[u8], key_ab: &[u8], key_ac: &[u8]) -> Result<Vec<u8>> {
    xor3(cipher, key_ab, key_ac)
}

/// What one player learns alone: the ciphertext with their key removed.
pub fn single_share_view(cipher: &[u8], own_key: &[u8]) -> Result<Vec<u8>> {
    if cipher.len() != own_key.len() {
        return Err(CryptoError::Length(cipher.len(), own_key.len()));
    }
    Ok(cipher.iter().zip(own_key).map(|(a, b)| (a ^ b) & 1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_keys_pass_the_message_through() {
        let m = vec![1, 0, 1, 1];
        assert_eq!(qss_encrypt(&m, &[0; 4], &[0; 4]).unwrap(), m);
    }

    #[test]
    fn lengths_must_match() {
        assert_eq!(qss_encrypt(&[1, 0], &[1], &[0, 0]), Err(CryptoError::Length(2, 1)));
        assert!(qss_reconstruct(&[1, 0], &[1, 1], &[0]).is_err());
    }
}
