//! Matrices of simulated group elements and their CSV/JSON forms.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    /// `walk`, `diffusion`, `path`, ...
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub seed: u64,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recentering: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Row-major `trials × dim` matrix of coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub names: Vec<String>,
    pub rows: Vec<f64>,
    pub meta: BatchMeta,
}

impl SampleBatch {
    pub fn new(names: Vec<String>, rows: Vec<f64>, meta: BatchMeta) -> Result<Self> {
        let dim = names.len();
        if dim == 0 || rows.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!("{} values do not fill rows of width {dim}", rows.len())));
        }
        Ok(Self { names, rows, meta })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], meta: BatchMeta) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != names.len()) {
            return Err(Error::DimensionMismatch { expected: names.len(), got: r.len() });
        }
        Self::new(names, rows.concat(), meta)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.rows[i * d..(i + 1) * d]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.dim())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    /// Projection of every row on the direction `v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.iter_rows().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim()).map(|j| self.iter_rows().map(|r| r[j]).sum::<f64>() / n).collect()
    }

    /// Applies `f` to each row.
    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = self.iter_rows().map(f).collect();
        Self::from_rows(self.names.clone(), &rows, self.meta.clone())
    }

    /// CSV with a header of coordinate names, `.` decimals and `\n` line endings.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record(&self.names)?;
        for r in self.iter_rows() {
            wr.write_record(r.iter().map(|v| format!("{v:?}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, meta: BatchMeta) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let names: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            for field in rec?.iter() {
                rows.push(
                    field.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number {field:?}")))?,
                );
            }
        }
        Self::new(names, rows, meta)
    }

    pub fn save(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(csv_path)?))?;
        std::fs::write(meta_path, serde_json::to_string_pretty(&self.meta)? + "\n")?;
        Ok(())
    }

    pub fn load(csv_path: &Path, meta_path: Option<&Path>) -> Result<Self> {
        let meta = match meta_path {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => BatchMeta::default(),
        };
        Self::read_csv(std::fs::File::open(csv_path)?, meta)
    }
}
