use super::Window;
use crate::cube::GridSpec;
use crate::{Error, Result};

/// Windows produced by sliding a fixed-size block across the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub windows: Vec<Window>,
    /// Cells `(x, y)` that no window covers, row-major.
    pub uncovered: Vec<(usize, usize)>,
}

impl Partition {
    /// Number of windows covering each cell, row-major.
    pub fn coverage_counts(&self, grid: &GridSpec) -> Vec<usize> {
        let mut counts = vec![0; grid.n_cells()];
        for w in &self.windows {
            for c in w.grid_cells(grid) {
                counts[c] += 1;
            }
        }
        counts
    }
}

/// Slides a `size` window from the upper-left corner in `stride` steps.
///
/// Origins are `(a·sx, b·sy)` for every origin inside the grid; windows
/// crossing the far edges are clipped. Ordered row by row.
pub fn partition(grid: &GridSpec, size: (usize, usize), stride: (usize, usize)) -> Result<Partition> {
    let (w, h) = size;
    let (sx, sy) = stride;
    if w == 0 || h == 0 || sx == 0 || sy == 0 {
        return Err(Error::invalid("window size and stride must be at least 1"));
    }
    let mut windows = Vec::new();
    for y0 in (0..grid.height()).step_by(sy) {
        for x0 in (0..grid.width()).step_by(sx) {
            windows.push(Window::clipped(grid, x0, y0, w, h)?);
        }
    }
    let mut covered = vec![false; grid.n_cells()];
    for win in &windows {
        for c in win.grid_cells(grid) {
            covered[c] = true;
        }
    }
    let uncovered = covered
        .iter()
        .enumerate()
        .filter(|(_, c)| !**c)
        .map(|(i, _)| grid.coords(i))
        .collect();
    Ok(Partition { windows, uncovered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force: test every cell against every nominal (unclipped) window.
    fn covered_by_brute_force(width: usize, height: usize, size: (usize, usize), stride: (usize, usize)) -> Vec<usize> {
        let mut counts = vec![0; width * height];
        for y in 0..height {
            for x in 0..width {
                let mut oy = 0;
                while oy < height {
                    let mut ox = 0;
                    while ox < width {
                        if x >= ox && x < ox + size.0 && y >= oy && y < oy + size.1 {
                            counts[y * width + x] += 1;
                        }
                        ox += stride.0;
                    }
                    oy += stride.1;
                }
            }
        }
        counts
    }

    #[test]
    fn stride_16_geometry_leaves_bands() {
        let g = GridSpec::uniform(128, 64, 5.0, 1.0).unwrap();
        let p = partition(&g, (10, 10), (16, 16)).unwrap();
        assert_eq!(p.windows.len(), 32);
        let xs: Vec<usize> = p.windows.iter().take(8).map(|w| w.x0).collect();
        assert_eq!(xs, vec![0, 16, 32, 48, 64, 80, 96, 112]);
        assert_eq!(p.windows.last().unwrap().y0, 48);
        assert!(p.windows.iter().all(|w| w.width == 10 && w.height == 10));
        let brute = covered_by_brute_force(128, 64, (10, 10), (16, 16));
        let expect: Vec<(usize, usize)> = (0..128 * 64)
            .filter(|c| brute[*c] == 0)
            .map(|c| (c % 128, c / 128))
            .collect();
        assert_eq!(p.uncovered, expect);
        assert!(p.uncovered.contains(&(10, 0)) && p.uncovered.contains(&(15, 5)));
        assert!(!p.uncovered.contains(&(9, 9)));
    }

    #[test]
    fn half_stride_covers_everything() {
        let g = GridSpec::uniform(20, 20, 5.0, 1.0).unwrap();
        let p = partition(&g, (10, 10), (5, 5)).unwrap();
        assert!(p.uncovered.is_empty());
        let counts = p.coverage_counts(&g);
        assert_eq!(counts, covered_by_brute_force(20, 20, (10, 10), (5, 5)));
        assert_eq!(counts[g.index(0, 0)], 1);
        assert_eq!(counts[g.index(10, 10)], 4);
        assert_eq!(counts[g.index(7, 12)], 4);
    }

    #[test]
    fn oversized_window_is_whole_grid() {
        let g = GridSpec::uniform(7, 3, 5.0, 1.0).unwrap();
        let p = partition(&g, (10, 10), (50, 1)).unwrap();
        assert_eq!(p.windows.len(), 3);
        let p = partition(&g, (10, 10), (7, 3)).unwrap();
        assert_eq!(p.windows, vec![Window::whole(&g)]);
    }

    #[test]
    fn zero_stride_is_rejected() {
        let g = GridSpec::uniform(4, 4, 5.0, 1.0).unwrap();
        assert!(partition(&g, (2, 2), (0, 1)).is_err());
    }

    proptest! {
        #[test]
        fn coverage_report_tiles_grid(
            width in 1usize..30, height in 1usize..30,
            w in 1usize..12, h in 1usize..12,
            sx in 1usize..15, sy in 1usize..15,
        ) {
            let g = GridSpec::uniform(width, height, 1.0, 1.0).unwrap();
            let p = partition(&g, (w, h), (sx, sy)).unwrap();
            let counts = p.coverage_counts(&g);
            prop_assert_eq!(&counts, &covered_by_brute_force(width, height, (w, h), (sx, sy)));
            for c in 0..g.n_cells() {
                let listed = p.uncovered.contains(&g.coords(c));
                prop_assert!(listed != (counts[c] > 0));
            }
            for win in &p.windows {
                prop_assert!(win.n_cells() > 0);
                prop_assert!(win.x0 + win.width <= width && win.y0 + win.height <= height);
            }
        }
    }
}
