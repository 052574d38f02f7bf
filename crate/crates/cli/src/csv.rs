//! Minimal CSV emission with a frozen numeric format: every float is
//! printed with 17 significant digits so files are byte-identical across
//! runs and reproduce the exact binary values.

use std::io::Write;
use std::path::Path;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvFile {
    rows: Vec<String>,
}

impl CsvFile {
    pub fn new(header: &str) -> Self {
        CsvFile {
            rows: vec![header.to_string()],
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.rows.push(fields.join(","));
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        for row in &self.rows {
            writeln!(file, "{row}")?;
        }
        Ok(())
    }
}
