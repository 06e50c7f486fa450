//! Campaign reproducibility records: unique output directories plus a
//! manifest holding the effective config, base seed and a content hash of
//! every artifact.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

/// FNV-1a 64-bit content fingerprint.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Create a fresh campaign directory under `base`: `<name>_<millis>[_k]`.
/// Existing directories are never reused or mutated.
pub fn unique_dir(base: &Path, name: &str) -> io::Result<PathBuf> {
    std::fs::create_dir_all(base)?;
    let millis = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    for k in 0..1000u32 {
        let dir = if k == 0 {
            base.join(format!("{name}_{millis}"))
        } else {
            base.join(format!("{name}_{millis}_{k}"))
        };
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    Err(io::Error::other("could not allocate a unique campaign dir"))
}

/// Write `manifest.txt`: effective config, base seed, per-file fingerprints.
/// The manifest itself is a pure function of (config, seed, artifact bytes).
pub fn write_manifest(
    dir: &Path,
    config_text: &str,
    base_seed: u64,
    files: &[(String, u64)],
) -> io::Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "base_seed = {base_seed}");
    let _ = writeln!(out, "config_hash = {:016x}", fnv1a64(config_text.as_bytes()));
    out.push_str("\n[config]\n");
    out.push_str(config_text);
    out.push_str("\n[artifacts]\n");
    let mut sorted: Vec<_> = files.to_vec();
    sorted.sort();
    for (name, hash) in sorted {
        let _ = writeln!(out, "{name} = {hash:016x}");
    }
    std::fs::write(dir.join("manifest.txt"), out)
}

/// Write an artifact and return its (name, hash) manifest entry.
pub fn write_artifact(dir: &Path, name: &str, content: &str) -> io::Result<(String, u64)> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, content)?;
    Ok((name.to_string(), fnv1a64(content.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_ne!(fnv1a64(b"ab"), fnv1a64(b"ba"));
    }

    #[test]
    fn unique_dirs_do_not_collide() {
        let base = std::env::temp_dir().join(format!("aquaplan_test_{}", std::process::id()));
        let a = unique_dir(&base, "campaign").unwrap();
        let b = unique_dir(&base, "campaign").unwrap();
        assert_ne!(a, b);
        std::fs::remove_dir_all(&base).ok();
    }
}
