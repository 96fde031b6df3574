//! Tables, manifest and the single writer that puts them on disk.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Fixed notation with 10 significant digits. Non-finite values are written
/// as `nan`, `inf` or `-inf`.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0.000000000".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (9 - magnitude).clamp(0, 30) as usize;
    let s = format!("{x:.decimals$}");
    // tiny negatives that round to zero lose their sign
    if s == format!("{:.decimals$}", -0.0f64) {
        return format!("{:.decimals$}", 0.0f64);
    }
    s
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// A CSV table with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }

    /// Whitespace-separated copy for gnuplot, with a commented header. Empty
    /// cells become `nan`.
    pub fn to_dat(&self) -> Vec<u8> {
        let mut out = format!("# {}\n", self.header.join(" "));
        for row in &self.rows {
            let cells: Vec<&str> = row.iter().map(|c| if c.is_empty() { "nan" } else { c.as_str() }).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out.into_bytes()
    }
}

/// Ordered `key = value` pairs written into the manifest.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Results {
    pub entries: Vec<(String, toml::Value)>,
}

impl Results {
    pub fn num(&mut self, key: &str, x: f64) {
        self.entries.push((key.into(), toml::Value::String(fmt_num(x))));
    }

    pub fn text(&mut self, key: &str, s: impl Into<String>) {
        self.entries.push((key.into(), toml::Value::String(s.into())));
    }

    pub fn int(&mut self, key: &str, n: i64) {
        self.entries.push((key.into(), toml::Value::Integer(n)));
    }

    pub fn flag(&mut self, key: &str, b: bool) {
        self.entries.push((key.into(), toml::Value::Boolean(b)));
    }
}

/// Collects every artifact of a run and writes them in one place, in
/// insertion order, each through a temporary file and a rename.
#[derive(Debug, Default)]
pub struct Collector {
    files: Vec<(String, Vec<u8>)>,
}

impl Collector {
    pub fn table(&mut self, stem: &str, table: &Table, dat: bool) -> Result<(), CliError> {
        self.files.push((format!("{stem}.csv"), table.to_csv()?));
        if dat {
            self.files.push((format!("{stem}.dat"), table.to_dat()));
        }
        Ok(())
    }

    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(fmt_num(0.0), "0.000000000");
        assert_eq!(fmt_num(1.0), "1.000000000");
        assert_eq!(fmt_num(-0.47626558919), "-0.4762655892");
        assert_eq!(fmt_num(250.0), "250.0000000");
        assert_eq!(fmt_num(1.5e-5), "0.00001500000000");
        assert_eq!(fmt_num(12345678901.0), "12345678901");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(-1e-40), "0.000000000000000000000000000000");
    }

    #[test]
    fn csv_and_dat() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), String::new()]);
        assert_eq!(t.to_csv().unwrap(), b"a,b\n1,\n");
        assert_eq!(t.to_dat(), b"# a b\n1 nan\n");
    }
}
