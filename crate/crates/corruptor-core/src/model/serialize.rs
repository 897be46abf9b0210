//! Versioned little-endian binary serialization of network parameters.
//!
//! Layout: 8-byte magic, u32 version, u32 class count, u64 parameter count,
//! the parameters as f64 little-endian in canonical order, and a u64
//! checksum (wrapping sum of the parameter bit patterns).

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::TinyConvNet;

const MAGIC: [u8; 8] = *b"CRPTNET1";
const VERSION: u32 = 1;

/// Writes the network to `path`.
pub fn save_model(net: &TinyConvNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let params = net.params_flat();
    let mut bytes = Vec::with_capacity(24 + params.len() * 8 + 8);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(net.class_count() as u32).to_le_bytes());
    bytes.extend_from_slice(&(params.len() as u64).to_le_bytes());
    let mut checksum: u64 = 0;
    for p in &params {
        let bits = p.to_bits();
        checksum = checksum.wrapping_add(bits);
        bytes.extend_from_slice(&bits.to_le_bytes());
    }
    bytes.extend_from_slice(&checksum.to_le_bytes());
    std::fs::write(path, bytes).map_err(|e| Error::write(path, e))
}

/// Reads a network from `path`, validating magic, version, parameter count
/// and checksum.
pub fn load_model(path: impl AsRef<Path>) -> Result<TinyConvNet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    let fail = |reason: &str| Error::read(path, reason);

    if bytes.len() < 24 + 8 {
        return Err(fail("file too short for a model header"));
    }
    if bytes[0..8] != MAGIC {
        return Err(fail("bad magic; not a model file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(fail(&format!("unsupported model version {version}")));
    }
    let class_count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let param_count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if param_count != TinyConvNet::parameter_count_for(class_count) {
        return Err(fail(&format!(
            "parameter count {param_count} does not match {class_count} classes"
        )));
    }
    let expected_len = 24 + param_count * 8 + 8;
    if bytes.len() != expected_len {
        return Err(fail(&format!(
            "file length {} does not match header ({expected_len})",
            bytes.len()
        )));
    }
    let mut params = Vec::with_capacity(param_count);
    let mut checksum: u64 = 0;
    for i in 0..param_count {
        let off = 24 + i * 8;
        let bits = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        checksum = checksum.wrapping_add(bits);
        params.push(f64::from_bits(bits));
    }
    let stored = u64::from_le_bytes(bytes[expected_len - 8..].try_into().unwrap());
    if stored != checksum {
        return Err(fail("checksum mismatch; file is corrupt"));
    }
    TinyConvNet::from_flat(class_count, &params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = TinyConvNet::new(3, 42).unwrap();
        save_model(&net, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(net.params_flat(), back.params_flat());
        assert_eq!(net.class_count(), back.class_count());
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = TinyConvNet::new(3, 1).unwrap();
        save_model(&net, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        std::fs::write(&path, bytes).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        std::fs::write(&path, b"NOTAMODELxxxxxxxxxxxxxxxxxxxxxxxxxxx").unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }
}
