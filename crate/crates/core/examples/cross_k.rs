//! Cross-K curves between point patterns, and between predicted and actual
//! hotspots of a gridded forecast.
//!
//! cargo run --example cross_k

use crashcast::cube::{GridSpec, SpaceTimeCube};
use crashcast::eval::{cross_k, crossk_evaluate, default_radii, hotspot_points, Point};
use crashcast::forecast::ForecastGrid;

fn main() -> crashcast::Result<()> {
    let a = [Point::new(0.0, 0.0)];
    let b = [Point::new(3.0, 0.0)];
    println!("two points 3 mi apart, area 100: {:?}", cross_k(&a, &b, 100.0, &[2.0, 4.0])?);

    let grid = GridSpec::uniform(20, 20, 5.0, 1.0)?;
    let mut frame = vec![0.0; grid.n_cells()];
    frame[grid.index(2, 3)] = 4.0;
    println!("top hotspot: {:?}", hotspot_points(&grid, &frame, 1)?);

    // truth: a cluster of active cells near one corner for four weeks
    let weeks = 4;
    let mut target = vec![0.0; grid.n_cells() * weeks];
    for (x, y) in [(2, 2), (3, 2), (2, 3), (4, 4)] {
        for t in 0..weeks {
            target[grid.index(x, y) * weeks + t] = 1.0 + t as f64;
        }
    }
    let truth = SpaceTimeCube::new(grid.clone(), weeks, target)?;

    let mut near = ForecastGrid::empty(20, 20, 0..weeks);
    let mut far = ForecastGrid::empty(20, 20, 0..weeks);
    for c in 0..grid.n_cells() {
        let (x, y) = grid.coords(c);
        for t in 0..weeks {
            near.set(c, t, 1.0 / (1.0 + ((x as f64 - 3.0).powi(2) + (y as f64 - 3.0).powi(2))));
            far.set(c, t, (x + y) as f64);
        }
    }
    let radii = default_radii();
    let k_near = crossk_evaluate(&near, &truth, &radii)?;
    let k_far = crossk_evaluate(&far, &truth, &radii)?;
    println!("{:>5} {:>10} {:>10}", "r", "aligned", "distant");
    for i in 0..radii.len() {
        println!("{:>5} {:>10.1} {:>10.1}", radii[i], k_near.k[i], k_far.k[i]);
    }
    Ok(())
}
