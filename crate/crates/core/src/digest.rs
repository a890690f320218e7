use sha2::{Digest, Sha256};

/// Hex SHA-256 of a canonical text rendering.
pub(crate) fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
