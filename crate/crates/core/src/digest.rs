//! Content digests embedded in output files for tamper detection.

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let out = Sha256::digest(bytes);
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Short digest (first 16 hex chars) used in headers.
pub fn short(bytes: &[u8]) -> String {
    sha256_hex(bytes)[..16].to_string()
}
