use serde::{Deserialize, Serialize};

use crate::calculus::{weighted_h2_distance, weighted_h2_norm, DiagonalProcess, TriangularField, WeightedNormParams};
use crate::error::Result;
use crate::scenario::TimeGrid;

/// A pair `(y(.), z(., .))` on the grid: the argument and the value of the
/// Picard map.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenField {
    pub y: DiagonalProcess,
    pub z: TriangularField,
}

/// Starting point of the Picard iteration on the unknown rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// `y = 0`, `z = 0`
    #[default]
    Zero,
    /// `y(t_i) = xi` on every path, `z = 0`
    Terminal,
}

impl FrozenField {
    pub fn zeros(grid: &TimeGrid, n_paths: usize, k: usize, d: usize) -> Self {
        Self {
            y: DiagonalProcess::zeros(grid, n_paths, k),
            z: TriangularField::zeros(grid, n_paths, k, d),
        }
    }

    /// `y(t_i) = xi` for every `i`, `z = 0`; `xi` is `M x k`.
    pub fn terminal_constant(grid: &TimeGrid, n_paths: usize, k: usize, d: usize, xi: &[f64]) -> Self {
        let mut f = Self::zeros(grid, n_paths, k, d);
        for s in f.y.slices_mut() {
            s.copy_from_slice(xi);
        }
        f
    }

    pub fn initial(init: Init, grid: &TimeGrid, n_paths: usize, k: usize, d: usize, xi: &[f64]) -> Self {
        let mut f = match init {
            Init::Zero => Self::zeros(grid, n_paths, k, d),
            Init::Terminal => Self::terminal_constant(grid, n_paths, k, d, xi),
        };
        f.y.slice_mut(grid.n_steps).copy_from_slice(xi);
        f
    }

    /// Resets rows `rows` to the initial value, leaving the rest untouched.
    pub fn reset_rows(&mut self, rows: std::ops::Range<usize>, init: Init, xi: &[f64]) {
        let n = self.y.grid.n_steps;
        for i in rows {
            match init {
                Init::Zero => self.y.slice_mut(i).fill(0.0),
                Init::Terminal => self.y.slice_mut(i).copy_from_slice(xi),
            }
            if i < n {
                self.z.row_mut(i).fill(0.0);
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.y.scale(c);
        self.z.scale(c);
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.z.is_finite()
    }

    /// Squared weighted norm.
    pub fn norm_sq(&self, p: &WeightedNormParams) -> Result<f64> {
        weighted_h2_norm(&self.y, &self.z, p)
    }

    /// Squared weighted distance.
    pub fn distance_sq(&self, other: &FrozenField, p: &WeightedNormParams) -> Result<f64> {
        weighted_h2_distance(&self.y, &self.z, &other.y, &other.z, p)
    }
}
