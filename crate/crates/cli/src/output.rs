//! Output directory with hash-stamped CSV and JSON writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub struct Output {
    dir: PathBuf,
    model: PathBuf,
    hash: String,
}

impl Output {
    /// `target` is a directory, or a `.json` path naming the model file, in
    /// which case the other outputs go next to it.
    pub fn create(target: &Path, hash: String) -> Result<Self> {
        let (dir, model) = if target.extension().is_some_and(|e| e == "json") {
            let dir = match target.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            (dir, target.to_path_buf())
        } else {
            (target.to_path_buf(), target.join("model.json"))
        };
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, model, hash })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `# config_sha256=<hash>`, the header, then the rows.
    pub fn csv<I, R>(&self, name: &str, header: &[String], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.path(name);
        let mut file = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(file, "# config_sha256={}", self.hash)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.into_iter().collect::<Vec<_>>())?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        write_json(&path, value)?;
        Ok(path)
    }

    pub fn model<T: Serialize>(&self, value: &T) -> Result<PathBuf> {
        write_json(&self.model, value)?;
        Ok(self.model.clone())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Shortest round-trip form, in exponent notation.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_starts_with_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let out = Output::create(&dir.path().join("run"), "abc".into()).unwrap();
        let p = out.csv("t.csv", &["x".into(), "y".into()], [vec![num(0.5), num(-2e-9)]]).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text, "# config_sha256=abc\nx,y\n5e-1,-2e-9\n");
        assert_eq!("-2e-9".parse::<f64>().unwrap(), -2e-9);
    }

    #[test]
    fn json_target_names_the_model() {
        let dir = tempfile::tempdir().unwrap();
        let out = Output::create(&dir.path().join("m.json"), "h".into()).unwrap();
        assert_eq!(out.model(&1).unwrap(), dir.path().join("m.json"));
        assert_eq!(out.path("grid.csv"), dir.path().join("grid.csv"));
    }
}
