//! Seeded synthetic cubes built from rectangular regional regimes.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GridSpec, SpaceTimeCube};
use crate::{Error, Result};

pub const SEASONAL_PERIOD: f64 = 52.0;

/// One rectangular region with its own level, trend, seasonality and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    #[serde(default)]
    pub name: String,
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    pub level: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub noise: f64,
    /// Static exposure feature (AADT-like) written for every cell of the region.
    #[serde(default)]
    pub exposure: f64,
}

impl RegimeSpec {
    fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.width && y >= self.y0 && y < self.y0 + self.height
    }

    fn overlaps(&self, other: &RegimeSpec) -> bool {
        self.x0 < other.x0 + other.width
            && other.x0 < self.x0 + self.width
            && self.y0 < other.y0 + other.height
            && other.y0 < self.y0 + self.height
    }

    /// Noise-free generator value at week `t`, before clamping at zero.
    pub fn mean_at(&self, t: usize) -> f64 {
        let t = t as f64;
        self.level + self.slope * t + self.amplitude * (2.0 * PI * t / SEASONAL_PERIOD).sin()
    }
}

/// Generates `max(0, level + slope·t + amplitude·sin(2πt/52) + noise)` for
/// every road cell, with Gaussian noise drawn from a ChaCha stream seeded by
/// `seed`. The cube carries two static features: `road_length` and
/// `exposure`. Returns the cube and, for each cell, the index of its regime.
pub fn synth_cube(
    grid: &GridSpec,
    weeks: usize,
    regimes: &[RegimeSpec],
    seed: u64,
) -> Result<(SpaceTimeCube, Vec<Option<usize>>)> {
    for (i, r) in regimes.iter().enumerate() {
        if r.width == 0 || r.height == 0 {
            return Err(Error::invalid(format!("regime {i} has an empty region")));
        }
        if r.x0 + r.width > grid.width() || r.y0 + r.height > grid.height() {
            return Err(Error::invalid(format!("regime {i} extends past the grid")));
        }
        if !(r.noise >= 0.0 && r.noise.is_finite()) {
            return Err(Error::invalid(format!("regime {i} noise must be nonnegative")));
        }
        for (j, other) in regimes.iter().enumerate().skip(i + 1) {
            if r.overlaps(other) {
                return Err(Error::invalid(format!("regimes {i} and {j} overlap")));
            }
        }
    }

    let n = grid.n_cells();
    let mut membership = vec![None; n];
    for (c, slot) in membership.iter_mut().enumerate() {
        let (x, y) = grid.coords(c);
        *slot = regimes.iter().position(|r| r.contains(x, y));
        if slot.is_none() && grid.is_road(c) {
            return Err(Error::invalid(format!(
                "road cell ({x}, {y}) is not covered by any regime"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut target = vec![f64::NAN; n * weeks];
    let mut exposure = vec![0.0; n];
    for c in 0..n {
        let Some(ri) = membership[c] else { continue };
        let regime = &regimes[ri];
        exposure[c] = regime.exposure;
        if !grid.is_road(c) {
            continue;
        }
        let normal = Normal::new(0.0, regime.noise)
            .map_err(|e| Error::invalid(format!("regime {ri}: {e}")))?;
        for t in 0..weeks {
            let eps = if regime.noise > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            target[c * weeks + t] = (regime.mean_at(t) + eps).max(0.0);
        }
    }

    let cube = SpaceTimeCube::new(grid.clone(), weeks, target)?
        .with_feature("road_length", grid.road_length_miles().to_vec())?
        .with_feature("exposure", exposure)?;
    Ok((cube, membership))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regime(level: f64, slope: f64, amplitude: f64, noise: f64) -> RegimeSpec {
        RegimeSpec {
            name: String::new(),
            x0: 0,
            y0: 0,
            width: 3,
            height: 2,
            level,
            slope,
            amplitude,
            noise,
            exposure: 1.0,
        }
    }

    #[test]
    fn flat_regime_is_constant() {
        let g = GridSpec::uniform(3, 2, 5.0, 1.0).unwrap();
        let (cube, _) = synth_cube(&g, 20, &[regime(2.0, 0.0, 0.0, 0.0)], 1).unwrap();
        assert!(cube.target_raw().iter().all(|v| *v == 2.0));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let g = GridSpec::uniform(3, 2, 5.0, 1.0).unwrap();
        let r = [regime(1.0, 0.01, 0.5, 0.3)];
        let (a, _) = synth_cube(&g, 60, &r, 9).unwrap();
        let (b, _) = synth_cube(&g, 60, &r, 9).unwrap();
        let bits = |c: &SpaceTimeCube| c.target_raw().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let (c, _) = synth_cube(&g, 60, &r, 10).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn trend_value_at_week_100() {
        let g = GridSpec::uniform(3, 2, 5.0, 1.0).unwrap();
        let (cube, _) = synth_cube(&g, 101, &[regime(1.0, 0.01, 0.0, 0.0)], 0).unwrap();
        assert!((cube.value(0, 100).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noise_free_matches_formula_everywhere() {
        let g = GridSpec::uniform(3, 2, 5.0, 1.0).unwrap();
        let r = regime(0.2, -0.003, 0.7, 0.0);
        let (cube, _) = synth_cube(&g, 120, std::slice::from_ref(&r), 3).unwrap();
        for c in 0..6 {
            for t in 0..120 {
                let tf = t as f64;
                let expect = (0.2 - 0.003 * tf + 0.7 * (2.0 * PI * tf / 52.0).sin()).max(0.0);
                assert_eq!(cube.raw(c, t), expect);
            }
        }
    }

    #[test]
    fn overlapping_regimes_are_rejected() {
        let g = GridSpec::uniform(3, 2, 5.0, 1.0).unwrap();
        let a = regime(1.0, 0.0, 0.0, 0.0);
        let mut b = a.clone();
        b.x0 = 2;
        b.width = 1;
        assert!(synth_cube(&g, 5, &[a, b], 0).is_err());
    }

    #[test]
    fn noisy_values_stay_nonnegative() {
        let g = GridSpec::uniform(3, 2, 5.0, 1.0).unwrap();
        let (cube, _) = synth_cube(&g, 200, &[regime(0.1, 0.0, 0.0, 1.0)], 5).unwrap();
        assert!(cube.target_raw().iter().all(|v| *v >= 0.0));
    }
}
