//! JSON system files: `{"A": [[..]], "B": .., "C": .., "D": .., "name": ..}`.
//!
//! Matrices are row-major arrays of arrays. Floats are written with the
//! shortest representation that round-trips, so `load(save(S)) == S` bit for
//! bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::StateSpace;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], cols: Option<usize>, what: &str) -> Result<Matrix> {
    let ncols = rows.first().map(Vec::len).or(cols).unwrap_or(0);
    if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!("{what}: row {r} has {} entries, expected {ncols}", rows[r].len())));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl SystemFile {
    pub fn from_system(s: &StateSpace, name: Option<&str>) -> Self {
        SystemFile { a: rows(&s.a), b: rows(&s.b), c: rows(&s.c), d: rows(&s.d), name: name.map(str::to_string) }
    }

    /// Builds the system; empty `A`/`B`/`C` take their widths from `D`.
    pub fn to_system(&self) -> Result<StateSpace> {
        let d = matrix(&self.d, None, "D")?;
        let n = self.a.len();
        let a = matrix(&self.a, Some(n), "A")?;
        let b = matrix(&self.b, Some(d.ncols()), "B")?;
        let c = matrix(&self.c, Some(n), "C")?;
        let c = if c.nrows() == 0 && d.nrows() > 0 { Matrix::zeros(d.nrows(), n) } else { c };
        StateSpace::new(a, b, c, d)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system files serialize")
    }
}

pub fn load_system(path: impl AsRef<Path>) -> Result<StateSpace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    SystemFile::from_json(&text)?.to_system()
}

pub fn save_system(path: impl AsRef<Path>, s: &StateSpace, name: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let mut text = SystemFile::from_system(s, name).to_json();
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
