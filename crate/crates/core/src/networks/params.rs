//! Flat parameter storage with a named shape table, and its checkpoint file.
//!
//! Checkpoint format (`*.json`, UTF-8):
//!
//! ```json
//! {
//!   "format": "spinn-checkpoint-v1",
//!   "scalar": "f64",
//!   "shapes": [{"name": "net0.W0", "shape": [100, 1], "offset": 0}, ...],
//!   "values": [0.0123, ...]
//! }
//! ```
//!
//! `values` is the flat vector in storage order; each tensor occupies
//! `values[offset .. offset + product(shape)]` in row-major order. Numbers are
//! written in shortest round-trip decimal form, so a save/load cycle is
//! bit-exact for `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::real::Real;

pub const CHECKPOINT_FORMAT: &str = "spinn-checkpoint-v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorShape {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorShape {
    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.size()
    }
}

/// Builds a contiguous shape table from `(name, shape)` pairs.
pub fn shape_table(entries: impl IntoIterator<Item = (String, Vec<usize>)>) -> Vec<TensorShape> {
    let mut offset = 0;
    entries
        .into_iter()
        .map(|(name, shape)| {
            let t = TensorShape { name, shape, offset };
            offset += t.size();
            t
        })
        .collect()
}

/// Flat parameter vector plus the table mapping named tensors to slices.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<T> {
    pub values: Vec<T>,
    pub shapes: Vec<TensorShape>,
}

impl<T: Real> NetworkParams<T> {
    pub fn zeros(shapes: Vec<TensorShape>) -> Self {
        let len = shapes.iter().map(TensorShape::size).sum();
        Self { values: vec![T::zero(); len], shapes }
    }

    pub fn from_values(values: Vec<T>, shapes: Vec<TensorShape>) -> Result<Self> {
        let p = Self { values, shapes };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for t in &self.shapes {
            if t.offset != expected {
                return Err(config(format!("tensor {} starts at {}, expected {expected}", t.name, t.offset)));
            }
            expected += t.size();
        }
        if expected != self.values.len() {
            return Err(config(format!(
                "shape table covers {expected} values but the vector has {}",
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[T]> {
        self.shapes.iter().find(|t| t.name == name).map(|t| &self.values[t.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [T]> {
        let range = self.shapes.iter().find(|t| t.name == name)?.range();
        Some(&mut self.values[range])
    }

    /// Splits into named tensors.
    pub fn unpack(&self) -> Vec<(String, Vec<usize>, Vec<T>)> {
        self.shapes
            .iter()
            .map(|t| (t.name.clone(), t.shape.clone(), self.values[t.range()].to_vec()))
            .collect()
    }

    /// Inverse of [`unpack`](Self::unpack).
    pub fn pack(tensors: Vec<(String, Vec<usize>, Vec<T>)>) -> Result<Self> {
        let mut values = Vec::new();
        let mut entries = Vec::new();
        for (name, shape, data) in tensors {
            if data.len() != shape.iter().product::<usize>() {
                return Err(config(format!("tensor {name}: {} values for shape {shape:?}", data.len())));
            }
            values.extend(data);
            entries.push((name, shape));
        }
        Ok(Self { values, shapes: shape_table(entries) })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            scalar: scalar_name::<T>().to_string(),
            shapes: self.shapes.clone(),
            values: self.values.iter().map(|v| v.to_f64_lossy()).collect(),
        };
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!("unsupported checkpoint format `{}`", file.format)));
        }
        Self::from_values(file.values.into_iter().map(T::lit).collect(), file.shapes)
    }
}

pub(crate) fn scalar_name<T: Real>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    scalar: String,
    shapes: Vec<TensorShape>,
    values: Vec<f64>,
}
