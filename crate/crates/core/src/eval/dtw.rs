use std::ops::Range;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::SpaceTimeCube;
use crate::{Error, Result};

pub const DEFAULT_MAX_SWAPS: usize = 50;

/// Dynamic time warping distance with `|a_i - b_j|` local cost.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("dtw needs nonempty series"));
    }
    Ok(dtw_unchecked(a, b))
}

fn dtw_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &ai in a {
        // diag = prev[j-1], left = cur[j-1]
        let mut diag = prev[0];
        let mut left = f64::INFINITY;
        cur[0] = f64::INFINITY;
        for ((&bj, &up), out) in b.iter().zip(&prev[1..]).zip(&mut cur[1..]) {
            let mut best = if diag < up { diag } else { up };
            if left < best {
                best = left;
            }
            left = (ai - bj).abs() + best;
            *out = left;
            diag = up;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Cluster label per grid cell, row-major; `None` for roadless cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub width: usize,
    pub height: usize,
    pub k: usize,
    pub labels: Vec<Option<usize>>,
    /// Medoid cell of each label, when produced by clustering.
    pub medoids: Vec<usize>,
}

impl ClusterLabels {
    pub fn new(width: usize, height: usize, k: usize, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::shape(format!(
                "{} labels for a {width}x{height} grid",
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().flatten().find(|l| **l >= k) {
            return Err(Error::invalid(format!("label {l} outside [0, {k})")));
        }
        Ok(Self {
            width,
            height,
            k,
            labels,
            medoids: Vec::new(),
        })
    }

    pub(crate) fn check_grid(&self, width: usize, height: usize) -> Result<()> {
        if (self.width, self.height) != (width, height) {
            return Err(Error::shape(format!(
                "labels cover {}x{}, grid is {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Writes `cell_x,cell_y,label` rows for labeled cells.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("cell_x,cell_y,label\n");
        for (c, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                out.push_str(&format!("{},{},{l}\n", c % self.width, c / self.width));
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a label file; `k` becomes one more than the largest label.
    pub fn read_csv(path: &Path, width: usize, height: usize) -> Result<Self> {
        let parse_err = |line: usize, reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| parse_err(0, e.to_string()))?;
        let mut labels = vec![None; width * height];
        for row in rdr.records() {
            let row = row.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            if row.len() != 3 {
                return Err(parse_err(line, format!("expected 3 fields, got {}", row.len())));
            }
            let field = |i: usize, name: &str| -> Result<usize> {
                row[i]
                    .parse()
                    .map_err(|_| parse_err(line, format!("invalid {name} {:?}", &row[i])))
            };
            let (x, y, l) = (field(0, "cell_x")?, field(1, "cell_y")?, field(2, "label")?);
            if x >= width || y >= height {
                return Err(parse_err(line, format!("cell ({x}, {y}) outside the grid")));
            }
            labels[y * width + x] = Some(l);
        }
        let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
        Self::new(width, height, k, labels)
    }

    /// Fraction of cells labeled alike in both, maximised over relabelings
    /// of `self`. Only cells labeled in both count.
    pub fn agreement(&self, other: &ClusterLabels) -> f64 {
        let pairs: Vec<(usize, usize)> = self
            .labels
            .iter()
            .zip(&other.labels)
            .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
            .collect();
        if pairs.is_empty() {
            return 0.0;
        }
        let k = self.k.max(other.k);
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0;
        permute(&mut perm, 0, &mut |p| {
            let hits = pairs.iter().filter(|(a, b)| p[*a] == *b).count();
            best = best.max(hits);
        });
        best as f64 / pairs.len() as f64
    }
}

fn permute(p: &mut Vec<usize>, i: usize, f: &mut dyn FnMut(&[usize])) {
    if i == p.len() {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, f);
        p.swap(i, j);
    }
}

/// k-medoids (PAM) over road-cell series restricted to `weeks`, under DTW.
///
/// Initial medoids are drawn from a generator seeded by `seed`; each
/// iteration applies the single best cost-reducing swap, stopping when none
/// improves or after `max_swaps` swaps. Labels are ordered by medoid cell
/// index.
pub fn cluster_dtw(
    cube: &SpaceTimeCube,
    weeks: Range<usize>,
    k: usize,
    seed: u64,
    max_swaps: usize,
) -> Result<ClusterLabels> {
    let grid = cube.grid();
    let cells: Vec<usize> = grid.road_cells().collect();
    let n = cells.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot form {k} clusters from {n} road cells")));
    }
    if weeks.is_empty() || weeks.end > cube.weeks() {
        return Err(Error::invalid(format!(
            "weeks {weeks:?} outside a {}-week cube",
            cube.weeks()
        )));
    }
    let series: Vec<&[f64]> = cells.iter().map(|c| &cube.series(*c)[weeks.clone()]).collect();

    // upper triangle by row, mirrored afterwards
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| dtw_unchecked(series[i], series[j])).collect())
        .collect();
    let mut dist = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (o, d) in row.iter().enumerate() {
            let j = i + 1 + o;
            dist[i * n + j] = *d;
            dist[j * n + i] = *d;
        }
    }
    let d = |i: usize, j: usize| dist[i * n + j];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids: Vec<usize> = sample(&mut rng, n, k).into_vec();
    medoids.sort_unstable();

    let cost_of = |meds: &[usize]| -> f64 {
        (0..n)
            .map(|i| meds.iter().map(|m| d(i, *m)).fold(f64::INFINITY, f64::min))
            .sum()
    };
    let mut cost = cost_of(&medoids);
    for _ in 0..max_swaps {
        // nearest and second-nearest medoid distance per point
        let mut near = vec![(0usize, f64::INFINITY, f64::INFINITY); n];
        for (i, slot) in near.iter_mut().enumerate() {
            for (mi, m) in medoids.iter().enumerate() {
                let v = d(i, *m);
                if v < slot.1 {
                    *slot = (mi, v, slot.1);
                } else if v < slot.2 {
                    slot.2 = v;
                }
            }
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for mi in 0..k {
            for h in 0..n {
                if medoids.contains(&h) {
                    continue;
                }
                let delta: f64 = (0..n)
                    .map(|i| {
                        let (nm, d1, d2) = near[i];
                        let dh = d(i, h);
                        if nm == mi {
                            dh.min(d2) - d1
                        } else {
                            dh.min(d1) - d1
                        }
                    })
                    .sum();
                if delta < -1e-12 * cost.max(1.0) && best.is_none_or(|b| delta < b.0) {
                    best = Some((delta, mi, h));
                }
            }
        }
        match best {
            Some((_, mi, h)) => {
                medoids[mi] = h;
                medoids.sort_unstable();
                cost = cost_of(&medoids);
            }
            None => break,
        }
    }

    let mut labels = vec![None; grid.n_cells()];
    for (i, cell) in cells.iter().enumerate() {
        let mut bl = 0;
        for (mi, m) in medoids.iter().enumerate() {
            if d(i, *m) < d(i, medoids[bl]) {
                bl = mi;
            }
        }
        labels[*cell] = Some(bl);
    }
    let mut out = ClusterLabels::new(grid.width(), grid.height(), k, labels)?;
    out.medoids = medoids.iter().map(|m| cells[*m]).collect();
    Ok(out)
}
