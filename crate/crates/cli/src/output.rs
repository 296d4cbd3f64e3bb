//! Output directory bookkeeping: every CSV starts with the config hash and
//! the run ends with a manifest listing each file and its digest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::Failure;

pub struct Outputs {
    dir: PathBuf,
    hash: String,
    files: Vec<(String, String)>,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Outputs {
    pub fn create(cfg: &Config) -> Result<Self, Failure> {
        let dir = cfg.output_dir();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            hash: cfg.hash(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write `body` under `name` with a `# config_hash=...` first line.
    pub fn write_csv(&mut self, name: &str, body: &str) -> Result<PathBuf, Failure> {
        let text = format!("# config_hash={}\n{body}", self.hash);
        let path = self.dir.join(name);
        fs::write(&path, &text)?;
        self.files
            .push((name.to_string(), hex_digest(text.as_bytes())));
        Ok(path)
    }

    pub fn write_manifest(&self, command: &str, cfg: &Config) -> Result<PathBuf, Failure> {
        let mut s = String::new();
        let _ = writeln!(s, "command = {command}");
        let _ = writeln!(s, "config_hash = {}", self.hash);
        let _ = writeln!(s, "seed = {}", cfg.get("seed").unwrap_or("none"));
        let _ = writeln!(s, "volterra-cli = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "volterra-core = {}", volterra::VERSION);
        s.push_str("\n[config]\n");
        s.push_str(&cfg.canonical());
        s.push_str("\n[files]\n");
        for (name, digest) in &self.files {
            let _ = writeln!(s, "{name} sha256={digest}");
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, s)?;
        Ok(path)
    }
}
