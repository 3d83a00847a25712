//! Small shared helpers.

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 over `parts` joined by a NUL separator.
///
/// The separator keeps `["ab", "c"]` and `["a", "bc"]` distinct.
pub(crate) fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(digest.len() * 2);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}
