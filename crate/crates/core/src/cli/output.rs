//! CSV tables and the JSON run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Full round-trip precision (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table with one header row, built in memory.
pub struct Table {
    header: Vec<String>,
    body: String,
}

pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            body: String::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        for (k, c) in row.into_iter().enumerate() {
            if k > 0 {
                self.body.push(',');
            }
            match c {
                Cell::Float(x) => self.body.push_str(&fmt_f64(x)),
                Cell::Int(i) => write!(self.body, "{i}").unwrap(),
                Cell::Text(s) => self.body.push_str(&s),
            }
        }
        self.body.push('\n');
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| Cell::Float(x)).collect());
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
    pub summary: serde_json::Value,
}

/// Collects output files under one directory and records their checksums.
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.root.join(name), contents)?;
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write(name, &table.render())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// File-name friendly form of a label such as `P+` or `Q3`.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| match c {
            '+' => 'p',
            '-' => 'm',
            c if c.is_ascii_alphanumeric() || c == '_' => c,
            _ => '_',
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn table_rendering() {
        let mut t = Table::new(["a", "b", "c"]);
        t.push(vec![1usize.into(), 0.5.into(), "x".into()]);
        assert_eq!(t.render(), "a,b,c\n1,5.0000000000000000e-1,x\n");
    }

    #[test]
    fn checksums_match_written_files() {
        let dir = std::env::temp_dir().join(format!("ethlab-out-{}", std::process::id()));
        let mut out = OutputDir::create(&dir).unwrap();
        out.write("x.csv", "a\n1\n").unwrap();
        let bytes = std::fs::read(dir.join("x.csv")).unwrap();
        assert_eq!(out.files[0].sha256, sha256_hex(&bytes));
        // sha256 of the empty string
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("P+"), "Pp");
        assert_eq!(slug("P-_Q3"), "Pm_Q3");
    }
}
