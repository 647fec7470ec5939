use std::path::Path;
use std::process::Command;

use rtsfnet::{Error, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.txt";

/// What was run, with enough detail to run it again.
#[derive(Debug, Default)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub dataset: Option<String>,
    pub seed: Option<u64>,
    pub out: String,
    pub config_hash: Option<String>,
    pub extra: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn git_head() -> String {
    Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

impl RunManifest {
    pub fn new(args: &[String], out: &Path) -> Self {
        RunManifest {
            command: args.iter().skip(1).map(|a| quote(a)).collect::<Vec<_>>().join(" "),
            out: out.display().to_string(),
            ..Default::default()
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: &str| s.push_str(&format!("{k} = {v}\n"));
        line("command", &self.command);
        line("version", env!("CARGO_PKG_VERSION"));
        line("git_commit", &git_head());
        if let Some(p) = &self.config_path {
            line("config", p);
        }
        if let Some(h) = &self.config_hash {
            line("config_sha256", h);
        }
        if let Some(d) = &self.dataset {
            line("dataset", d);
        }
        if let Some(seed) = self.seed {
            line("seed", &seed.to_string());
        }
        line("out", &self.out);
        for (k, v) in &self.extra {
            line(k, v);
        }
        s
    }

    /// Creates `dir` if needed and writes the manifest into it.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let path = dir.join(MANIFEST);
        std::fs::write(&path, self.render()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

fn quote(a: &str) -> String {
    if a.is_empty() || a.contains(|c: char| c.is_whitespace() || c == '"') {
        format!("{a:?}")
    } else {
        a.to_string()
    }
}
