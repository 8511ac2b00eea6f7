use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, Error, Result};
use crate::problems::ProblemName;
use crate::real::Real;

pub const GRID_FORMAT: &str = "spinn-grid-v1";

/// Discretization parameters recorded with a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub scheme: String,
    /// Intervals along each spatial axis.
    pub n: usize,
    /// Time steps of parabolic problems.
    pub m: Option<usize>,
    pub sigma: f64,
    pub tau: f64,
    pub layer_dim: usize,
    pub layer_at: f64,
}

/// Nodal values on a tensor grid, stored row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct GridSolution<T> {
    pub problem: ProblemName,
    pub epsilon: T,
    pub axes: Vec<Vec<T>>,
    pub values: Vec<T>,
    pub meta: GridMeta,
}

/// JSON sidecar written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub format: String,
    pub problem: ProblemName,
    pub epsilon: f64,
    pub shape: Vec<usize>,
    pub columns: Vec<String>,
    #[serde(flatten)]
    pub meta: GridMeta,
    pub csv: String,
    pub sha256: String,
}

/// Column names of the coordinates of `problem`.
pub fn coordinate_names(problem: ProblemName) -> Vec<&'static str> {
    match (problem.input_dim(), problem.is_time_dependent()) {
        (1, _) => vec!["x"],
        (_, true) => vec!["x", "t"],
        _ => vec!["x", "y"],
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl<T: Real> GridSolution<T> {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multi-index of flat position `flat`.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for k in (0..shape.len()).rev() {
            idx[k] = flat % shape[k];
            flat /= shape[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.shape()).fold(0, |acc, (&i, n)| acc * n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat).iter().zip(&self.axes).map(|(&i, axis)| axis[i]).collect()
    }

    pub fn points(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|f| self.point(f)).collect()
    }

    pub fn at(&self, idx: &[usize]) -> T {
        self.values[self.flat_index(idx)]
    }

    /// Multilinear interpolation; coordinates are clamped to the grid.
    pub fn interpolate(&self, x: &[T]) -> T {
        let mut cells = Vec::with_capacity(self.axes.len());
        for (axis, &v) in self.axes.iter().zip(x) {
            let n = axis.len();
            let hi = axis.partition_point(|&a| a < v).clamp(1, n - 1);
            let (a, b) = (axis[hi - 1], axis[hi]);
            let w = ((v - a) / (b - a)).max(T::zero()).min(T::one());
            cells.push((hi - 1, w));
        }
        let d = cells.len();
        let mut sum = T::zero();
        for corner in 0..(1usize << d) {
            let mut weight = T::one();
            let mut idx = Vec::with_capacity(d);
            for (k, &(lo, w)) in cells.iter().enumerate() {
                if corner >> k & 1 == 1 {
                    weight *= w;
                    idx.push(lo + 1);
                } else {
                    weight *= T::one() - w;
                    idx.push(lo);
                }
            }
            if weight != T::zero() {
                sum += weight * self.at(&idx);
            }
        }
        sum
    }

    fn csv_text(&self) -> String {
        let mut s = coordinate_names(self.problem).join(",");
        s.push_str(",u\n");
        for (f, v) in self.values.iter().enumerate() {
            for c in self.point(f) {
                write!(s, "{c},").unwrap();
            }
            writeln!(s, "{v}").unwrap();
        }
        s
    }

    /// Writes the CSV and its JSON sidecar; returns the sidecar.
    pub fn write(&self, csv: &Path) -> Result<GridSidecar> {
        let text = self.csv_text();
        std::fs::write(csv, &text)?;
        let mut columns: Vec<String> = coordinate_names(self.problem).iter().map(|s| s.to_string()).collect();
        columns.push("u".into());
        let sidecar = GridSidecar {
            format: GRID_FORMAT.into(),
            problem: self.problem,
            epsilon: self.epsilon.to_f64_lossy(),
            shape: self.shape(),
            columns,
            meta: self.meta.clone(),
            csv: csv.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            sha256: sha256_hex(text.as_bytes()),
        };
        std::fs::write(sidecar_path(csv), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(sidecar)
    }

    /// Reads a CSV written by [`GridSolution::write`], verifying the checksum
    /// recorded in its sidecar.
    pub fn read(csv: &Path) -> Result<Self> {
        let side_path = sidecar_path(csv);
        if !csv.exists() || !side_path.exists() {
            return Err(Error::MissingTestSet(format!(
                "{} (generate it with `spinn reference`)",
                csv.display()
            )));
        }
        let sidecar: GridSidecar = serde_json::from_str(&std::fs::read_to_string(&side_path)?)?;
        if sidecar.format != GRID_FORMAT {
            return Err(Error::Parse(format!("unsupported grid format `{}`", sidecar.format)));
        }
        let text = std::fs::read_to_string(csv)?;
        if sha256_hex(text.as_bytes()) != sidecar.sha256 {
            return Err(Error::Parse(format!("checksum mismatch for {}", csv.display())));
        }
        let d = sidecar.shape.len();
        let total: usize = sidecar.shape.iter().product();
        let mut axes: Vec<Vec<T>> = sidecar.shape.iter().map(|&n| Vec::with_capacity(n)).collect();
        let mut values = Vec::with_capacity(total);
        for (row, line) in text.lines().skip(1).enumerate() {
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", row + 2))))
                .collect::<Result<_>>()?;
            if fields.len() != d + 1 {
                return Err(Error::Parse(format!("line {}: expected {} fields", row + 2, d + 1)));
            }
            // an axis coordinate first appears where all faster indices are zero
            let mut rest = row;
            let mut idx = vec![0; d];
            for k in (0..d).rev() {
                idx[k] = rest % sidecar.shape[k];
                rest /= sidecar.shape[k];
            }
            for k in 0..d {
                if idx.iter().enumerate().all(|(j, &i)| j == k || i == 0) {
                    axes[k].push(T::lit(fields[k]));
                }
            }
            values.push(T::lit(fields[d]));
        }
        if values.len() != total {
            return Err(config(format!("grid has {} values, sidecar expects {total}", values.len())));
        }
        Ok(Self { problem: sidecar.problem, epsilon: T::lit(sidecar.epsilon), axes, values, meta: sidecar.meta })
    }
}
