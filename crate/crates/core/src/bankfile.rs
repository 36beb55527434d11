//! Parameter-bank files: flat CSV, one section per matrix.
//!
//! Each section is a header line `name,rows,cols` followed by `rows` lines
//! of comma-separated 64-bit floats in row-major order. Values are printed
//! with Rust's shortest round-trip formatting, so write/read round-trips
//! are bit-exact.

use crate::error::{Error, Result};
use crate::mat::Mat;
use std::path::Path;

/// An ordered collection of named matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BankFile {
    sections: Vec<(String, Mat)>,
}

impl BankFile {
    pub fn new() -> Self {
        BankFile::default()
    }

    pub fn push(&mut self, name: &str, mat: Mat) {
        self.sections.push((name.to_string(), mat));
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    /// Like [`BankFile::get`] but with a descriptive error.
    pub fn require(&self, name: &str) -> Result<&Mat> {
        self.get(name)
            .ok_or_else(|| Error::Parse(format!("bank file has no section `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(n, _)| n.as_str())
    }

    pub fn sections(&self) -> &[(String, Mat)] {
        &self.sections
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, mat) in &self.sections {
            out.push_str(&format!("{},{},{}\n", name, mat.rows(), mat.cols()));
            for r in 0..mat.rows() {
                let line: Vec<String> = mat.row(r).iter().map(|v| format!("{v}")).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut bank = BankFile::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((lineno, line)) = lines.next() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected `name,rows,cols`, got `{line}`",
                    lineno + 1
                )));
            }
            let name = parts[0].to_string();
            let rows: usize = parts[1]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad row count", lineno + 1)))?;
            let cols: usize = parts[2]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad col count", lineno + 1)))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (dlineno, dline) = lines.next().ok_or_else(|| {
                    Error::Parse(format!("section `{name}` truncated: expected {rows} rows"))
                })?;
                let mut count = 0;
                for cell in dline.split(',') {
                    let v: f64 = cell.trim().parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad float `{cell}`", dlineno + 1))
                    })?;
                    data.push(v);
                    count += 1;
                }
                if count != cols {
                    return Err(Error::Parse(format!(
                        "line {}: expected {cols} values, got {count}",
                        dlineno + 1
                    )));
                }
            }
            bank.push(&name, Mat::from_vec(rows, cols, data));
        }
        Ok(bank)
    }

    pub fn read(path: &Path) -> Result<Self> {
        BankFile::parse(&std::fs::read_to_string(path)?)
    }
}

/// Write one matrix as a single-section bank CSV.
pub fn export_matrix_csv(path: &Path, name: &str, mat: &Mat) -> Result<()> {
    let mut bank = BankFile::new();
    bank.push(name, mat.clone());
    bank.write(path)
}

/// Write a vector as an `n x 1` section.
pub fn export_vector_csv(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    export_matrix_csv(path, name, &Mat::from_vec(values.len(), 1, values.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn awkward_mat() -> Mat {
        Mat::from_fn(3, 4, |r, c| match (r, c) {
            (0, 0) => 0.1 + 0.2, // 0.30000000000000004
            (0, 1) => -0.0,
            (1, 0) => f64::MIN_POSITIVE,
            (1, 1) => 1.0 / 3.0,
            (2, 3) => 1e300,
            _ => (r * 4 + c) as f64 * -0.7,
        })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut bank = BankFile::new();
        bank.push("stft.real", awkward_mat());
        bank.push("head.bias", Mat::from_vec(1, 3, vec![0.0, -1.5, 42.0]));
        let text = bank.render();
        let back = BankFile::parse(&text).unwrap();
        assert_eq!(back, bank);
        for (name, mat) in bank.sections() {
            let got = back.get(name).unwrap();
            for (a, b) in mat.as_slice().iter().zip(got.as_slice()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn single_matrix_export_line_count() {
        let dir = std::env::temp_dir().join("specfront_bankfile");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bank.csv");
        export_matrix_csv(&path, "mel.weights", &Mat::zeros(40, 241)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 41); // header + 40 rows
        let back = BankFile::read(&path).unwrap();
        assert_eq!(back.get("mel.weights").unwrap().shape(), (40, 241));
    }

    #[test]
    fn vector_export_has_one_row_per_entry() {
        let dir = std::env::temp_dir().join("specfront_bankfile");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("vec.csv");
        let v: Vec<f64> = (0..241).map(|i| i as f64 / 241.0).collect();
        export_vector_csv(&path, "importance", &v).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 242);
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(BankFile::parse("name,2\n1,2\n").is_err());
        assert!(BankFile::parse("m,2,2\n1,2\n").is_err()); // truncated
        assert!(BankFile::parse("m,1,2\n1,x\n").is_err());
        assert!(BankFile::parse("m,1,3\n1,2\n").is_err()); // short row
    }
}
