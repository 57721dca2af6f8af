//! Content hashing used for prompt identity, record ids, and config stamps.

use sha2::{Digest, Sha256};

/// Full SHA-256 hex digest.
pub fn sha256_hex(data: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data.as_bytes());
    hex::encode(hasher.finalize())
}

/// First 128 bits of the SHA-256 digest, hex-encoded (32 chars).
pub fn short_hash(data: &str) -> String {
    sha256_hex(data)[..32].to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_are_stable_and_distinct() {
        assert_eq!(sha256_hex("abc"), sha256_hex("abc"));
        assert_ne!(sha256_hex("abc"), sha256_hex("abd"));
        assert_eq!(short_hash("abc").len(), 32);
        assert!(sha256_hex("abc").starts_with(&short_hash("abc")));
    }
}
