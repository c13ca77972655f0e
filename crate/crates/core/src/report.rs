//! Run directories and the provenance stamped on every output file.

use crate::error::{Error, Result};
use crate::noise::GENERATOR_ID;
use crate::SCHEMA_VERSION;
use serde::Serialize;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SHELAB_OUTPUT_DIR";
/// Output directory used when neither `--out` nor the environment names one.
pub const DEFAULT_OUTPUT_DIR: &str = "shelab-runs";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub generator: &'static str,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance { schema_version: SCHEMA_VERSION, config_hash: config_hash.into(), seed, generator: GENERATOR_ID }
    }

    /// `#`-prefixed header lines for CSV files.
    pub fn write_csv_preamble<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# schema_version={}", self.schema_version)?;
        writeln!(out, "# config_hash={}", self.config_hash)?;
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# generator={}", self.generator)
    }
}

/// A JSON document carrying the provenance fields next to its body.
#[derive(Debug, Serialize)]
pub struct Stamped<'a, T: Serialize> {
    #[serde(flatten)]
    pub provenance: &'a Provenance,
    #[serde(flatten)]
    pub body: &'a T,
}

/// Resolves the base output directory from the flag, then the environment.
pub fn output_base(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// A fresh directory `run-<unix seconds>-<hash prefix>[-n]`. Files inside
/// are created once and never overwritten.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(base: &Path, config_hash: &str, unix_secs: u64) -> Result<Self> {
        fs::create_dir_all(base)?;
        let stem = format!("run-{unix_secs}-{}", &config_hash[..config_hash.len().min(12)]);
        for n in 0u32.. {
            let name = if n == 0 { stem.clone() } else { format!("{stem}-{n}") };
            let path = base.join(name);
            match fs::create_dir(&path) {
                Ok(()) => return Ok(RunDir { path, files: Vec::new() }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            }
        }
        unreachable!("the suffix search always terminates")
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Names of the files written so far, in order.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Creates `name` (which must not exist yet) and fills it with `fill`.
    pub fn write_with(&mut self, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(self.path.join(name))
            .map_err(|e| Error::Config(format!("cannot create {name} in {}: {e}", self.path.display())))?;
        let mut w = BufWriter::new(file);
        fill(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Pretty JSON with a trailing newline, stamped with `provenance`.
    pub fn write_json<T: Serialize>(&mut self, name: &str, provenance: &Provenance, body: &T) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, &Stamped { provenance, body })?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// CSV with the provenance preamble.
    pub fn write_csv(
        &mut self,
        name: &str,
        provenance: &Provenance,
        fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<()> {
        self.write_with(name, |w| {
            provenance.write_csv_preamble(&mut *w)?;
            fill(w)?;
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dirs_never_collide() {
        let tmp = tempfile::tempdir().unwrap();
        let a = RunDir::create(tmp.path(), "abcdef0123456789", 100).unwrap();
        let b = RunDir::create(tmp.path(), "abcdef0123456789", 100).unwrap();
        assert_ne!(a.path(), b.path());
        assert!(b.path().ends_with("run-100-abcdef012345-1"));
    }

    #[test]
    fn files_are_not_overwritten() {
        let tmp = tempfile::tempdir().unwrap();
        let mut d = RunDir::create(tmp.path(), "00", 1).unwrap();
        let p = Provenance::new("00", 5);
        d.write_json("a.json", &p, &serde_json::json!({"x": 1})).unwrap();
        assert!(d.write_json("a.json", &p, &serde_json::json!({"x": 2})).is_err());
        let text = fs::read_to_string(d.path().join("a.json")).unwrap();
        assert!(text.contains("\"config_hash\": \"00\"") && text.contains("\"x\": 1"));
        d.write_csv("b.csv", &p, |w| writeln!(w, "z,value")).unwrap();
        let text = fs::read_to_string(d.path().join("b.csv")).unwrap();
        assert!(text.starts_with("# schema_version=1\n# config_hash=00\n# seed=5\n# generator="));
        assert_eq!(d.files(), ["a.json", "b.csv"]);
    }
}
