use super::Window;
use crate::cube::GridSpec;
use crate::{Error, Result};

/// One window model's forecast for a single week.
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub window: Window,
    pub weight: f64,
    /// Values over the window cells, row-major; `NaN` is ignored.
    pub prediction: &'a [f64],
}

/// Weighted average of the members covering each cell:
///
/// `Ĉ(s) = Σ_{i: s∈W_i} w_i Ĉ_i(s) / Σ_{i: s∈W_i} w_i`
///
/// Roadless cells come out null. A road cell with no covering member takes
/// its `fallback` value, or fails when there is none.
pub fn combine(grid: &GridSpec, members: &[Member<'_>], fallback: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = grid.n_cells();
    // Running weighted mean: exact for a single member, convex at every step.
    let mut mean = vec![0.0; n];
    let mut den = vec![0.0; n];
    for m in members {
        if !(m.weight > 0.0 && m.weight.is_finite()) {
            return Err(Error::invalid(format!("member weight must be positive, got {}", m.weight)));
        }
        if m.prediction.len() != m.window.n_cells() {
            return Err(Error::shape(format!(
                "prediction has {} values, window has {} cells",
                m.prediction.len(),
                m.window.n_cells()
            )));
        }
        for (cell, v) in m.window.grid_cells(grid).into_iter().zip(m.prediction) {
            if !v.is_nan() {
                den[cell] += m.weight;
                mean[cell] += (m.weight / den[cell]) * (v - mean[cell]);
            }
        }
    }
    if let Some(fb) = fallback {
        if fb.len() != n {
            return Err(Error::shape(format!("fallback has {} values, grid has {n}", fb.len())));
        }
    }
    let mut out = vec![f64::NAN; n];
    for cell in 0..n {
        if !grid.is_road(cell) {
            continue;
        }
        out[cell] = if den[cell] > 0.0 {
            mean[cell]
        } else if let Some(fb) = fallback {
            fb[cell]
        } else {
            let (x, y) = grid.coords(cell);
            return Err(Error::Uncovered { x, y });
        };
    }
    Ok(out)
}
