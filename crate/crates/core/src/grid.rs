//! Rectangular lattices of latent vectors, shared by J-diagrams and MINE grids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::latent::LatentVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellRole {
    Input,
    Reconstruction,
    Anchor,
    Interpolated,
    Analogy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
    pub role: CellRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    pub latent: LatentVector,
}

/// A rows × cols lattice of latents, stored row-major.
///
/// `extras` holds cells that sit beside the lattice rather than in it,
/// e.g. reconstructions shown next to the J-diagram inputs; their
/// coordinates name the lattice cell they accompany.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub meta: BTreeMap<String, Value>,
    pub cells: Vec<GridCell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extras: Vec<GridCell>,
}

impl GridManifest {
    /// Builds a manifest from row-major `(role, source_id, latent)` entries.
    pub fn from_row_major(
        rows: usize,
        cols: usize,
        entries: Vec<(CellRole, Option<String>, LatentVector)>,
        meta: BTreeMap<String, Value>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "rows/cols",
                value: 0.0,
            });
        }
        if entries.len() != rows * cols {
            return Err(Error::InvalidDataset(format!(
                "{} cells for a {rows}x{cols} grid",
                entries.len()
            )));
        }
        let cells = entries
            .into_iter()
            .enumerate()
            .map(|(k, (role, source_id, latent))| GridCell {
                row: k / cols,
                col: k % cols,
                role,
                source_id,
                latent,
            })
            .collect();
        let manifest = GridManifest {
            rows,
            cols,
            dim: 0,
            meta,
            cells,
            extras: Vec::new(),
        };
        manifest.with_dim()
    }

    fn with_dim(mut self) -> Result<Self> {
        self.dim = self.cells[0].latent.dim();
        self.validate()?;
        Ok(self)
    }

    /// Checks the structural invariants: one cell per coordinate in
    /// row-major order and a single shared latent dimension.
    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != self.rows * self.cols {
            return Err(Error::InvalidDataset(format!(
                "{} cells for a {}x{} grid",
                self.cells.len(),
                self.rows,
                self.cols
            )));
        }
        for (k, cell) in self.cells.iter().enumerate() {
            if (cell.row, cell.col) != (k / self.cols, k % self.cols) {
                return Err(Error::InvalidDataset(format!(
                    "cell {k} has coordinates ({}, {})",
                    cell.row, cell.col
                )));
            }
        }
        for cell in self.cells.iter().chain(&self.extras) {
            if cell.latent.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: cell.latent.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn cell(&self, row: usize, col: usize) -> &GridCell {
        &self.cells[row * self.cols + col]
    }

    pub fn latent(&self, row: usize, col: usize) -> &LatentVector {
        &self.cell(row, col).latent
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: GridManifest = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}
