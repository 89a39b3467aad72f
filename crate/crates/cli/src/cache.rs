use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Running sha256 over labelled stage inputs.
pub struct Fingerprint(Sha256);

impl Fingerprint {
    pub fn new(stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"stage\0");
        h.update(stage.as_bytes());
        Fingerprint(h)
    }

    fn part(&mut self, label: &str, bytes: &[u8]) {
        self.0.update(label.as_bytes());
        self.0.update([0]);
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    pub fn text(mut self, label: &str, value: &str) -> Self {
        self.part(label, value.as_bytes());
        self
    }

    pub fn json(mut self, label: &str, value: &impl Serialize) -> anyhow::Result<Self> {
        let bytes = serde_json::to_vec(value)?;
        self.part(label, &bytes);
        Ok(self)
    }

    pub fn file(mut self, path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.part(&path.display().to_string(), &bytes);
        Ok(self)
    }

    /// Every regular file directly in `dir`, by name.
    pub fn dir(mut self, dir: &Path) -> anyhow::Result<Self> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            self = self.file(&f)?;
        }
        Ok(self)
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// One digest file per stage under `<output>/.cache`.
pub struct StageCache {
    dir: PathBuf,
}

impl StageCache {
    pub fn new(output_dir: &Path) -> Self {
        StageCache {
            dir: output_dir.join(".cache"),
        }
    }

    fn path(&self, stage: &str) -> PathBuf {
        self.dir.join(format!("{stage}.sha256"))
    }

    pub fn stored(&self, stage: &str) -> Option<String> {
        std::fs::read_to_string(self.path(stage)).ok().map(|s| s.trim().to_string())
    }

    /// Recorded digest matches and every output still exists.
    pub fn is_fresh(&self, stage: &str, digest: &str, outputs: &[PathBuf]) -> bool {
        self.stored(stage).as_deref() == Some(digest) && outputs.iter().all(|p| p.exists())
    }

    pub fn store(&self, stage: &str, digest: &str) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(self.path(stage), format!("{digest}\n"))?;
        Ok(())
    }

    pub fn invalidate(&self, stage: &str) {
        let _ = std::fs::remove_file(self.path(stage));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_delimited() {
        let a = Fingerprint::new("s").text("ab", "c").finish();
        let b = Fingerprint::new("s").text("a", "bc").finish();
        assert_ne!(a, b);
        assert_eq!(a, Fingerprint::new("s").text("ab", "c").finish());
    }
}
