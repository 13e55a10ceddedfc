use serde::{Deserialize, Serialize};

use crate::cube::GridSpec;
use crate::{Error, Result};

/// Axis-aligned block of cells, already clipped to its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Window {
    /// The window covering the whole grid.
    pub fn whole(grid: &GridSpec) -> Self {
        Self {
            x0: 0,
            y0: 0,
            width: grid.width(),
            height: grid.height(),
        }
    }

    /// Window of nominal size `(w, h)` at `(x0, y0)`, clipped to the grid.
    pub fn clipped(grid: &GridSpec, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 >= grid.width() || y0 >= grid.height() || w == 0 || h == 0 {
            return Err(Error::invalid(format!(
                "window at ({x0}, {y0}) of size {w}x{h} is empty on a {}x{} grid",
                grid.width(),
                grid.height()
            )));
        }
        Ok(Self {
            x0,
            y0,
            width: w.min(grid.width() - x0),
            height: h.min(grid.height() - y0),
        })
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.width && y >= self.y0 && y < self.y0 + self.height
    }

    /// Grid cell index of every window cell, row-major within the window.
    pub fn grid_cells(&self, grid: &GridSpec) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_cells());
        for y in self.y0..self.y0 + self.height {
            for x in self.x0..self.x0 + self.width {
                out.push(grid.index(x, y));
            }
        }
        out
    }
}
