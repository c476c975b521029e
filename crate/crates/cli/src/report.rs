//! Deterministic JSON reports and comma-separated tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::problem::SCHEMA_VERSION;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    source: &'a str,
    outcome: &'a str,
    report: &'a T,
}

/// Output file names `<dir>/<stem>.<command>.<ext>`.
pub struct Sink {
    pub dir: PathBuf,
    pub stem: String,
    pub command: &'static str,
}

impl Sink {
    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}.{}{suffix}", self.stem, self.command))
    }

    pub fn json<T: Serialize>(&self, outcome: &str, report: &T) -> Result<PathBuf> {
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            source: &self.stem,
            outcome,
            report,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        let p = self.path(".json");
        write(&p, &text)?;
        Ok(p)
    }

    pub fn csv(&self, suffix: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(text, "{}", cells.join(","));
        }
        let p = self.path(&format!("{suffix}.csv"));
        write(&p, &text)?;
        Ok(p)
    }

    pub fn text(&self, suffix: &str, body: &str) -> Result<PathBuf> {
        let p = self.path(suffix);
        write(&p, body)?;
        Ok(p)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
