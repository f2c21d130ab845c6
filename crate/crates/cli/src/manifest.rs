//! Checksummed list of every artifact under the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: Vec<Artifact>,
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hashes every file under `root` except the manifest itself.
pub fn build_manifest(root: &Path) -> std::io::Result<Manifest> {
    let mut files = Vec::new();
    collect(root, &mut files)?;
    let mut artifacts = Vec::with_capacity(files.len());
    for path in files {
        let rel = path.strip_prefix(root).expect("collected under root");
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if rel == MANIFEST_FILE {
            continue;
        }
        let data = fs::read(&path)?;
        artifacts.push(Artifact {
            path: rel,
            sha256: hex(&Sha256::digest(&data)),
            bytes: data.len() as u64,
        });
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(Manifest { artifacts })
}

/// Rewrites `{root}/manifest.json`.
pub fn write_manifest(root: &Path) -> std::io::Result<Manifest> {
    let manifest = build_manifest(root)?;
    let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(root.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest_and_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("b")).unwrap();
        fs::write(dir.path().join("b/x.txt"), "abc").unwrap();
        fs::write(dir.path().join("a.txt"), "").unwrap();
        let m = write_manifest(dir.path()).unwrap();
        assert_eq!(m.artifacts.len(), 2);
        assert_eq!(m.artifacts[0].path, "a.txt");
        assert_eq!(m.artifacts[1].path, "b/x.txt");
        assert_eq!(
            m.artifacts[1].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            m.artifacts[0].sha256,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(write_manifest(dir.path()).unwrap(), m);
    }
}
