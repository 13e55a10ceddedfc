//! Dynamic time warping and k-medoids risk zones on a synthetic cube with
//! three planted regimes.
//!
//! cargo run --release --example dtw_clusters

use crashcast::cube::{synth_cube, GridSpec, RegimeSpec};
use crashcast::eval::{cluster_dtw, dtw, ClusterLabels, DEFAULT_MAX_SWAPS};

fn main() -> crashcast::Result<()> {
    println!("dtw([0,0],[1,1]) = {}", dtw(&[0.0, 0.0], &[1.0, 1.0])?);
    println!("dtw([1],[1,1,1]) = {}", dtw(&[1.0], &[1.0, 1.0, 1.0])?);

    let regime = |name: &str, x0, level, slope, amplitude, noise| RegimeSpec {
        name: name.into(),
        x0,
        y0: 0,
        width: 6,
        height: 12,
        level,
        slope,
        amplitude,
        noise,
        exposure: 1.0,
    };
    let regimes = [
        regime("increasing_low", 0, 0.5, 0.003, 0.1, 0.1),
        regime("volatile_high", 6, 3.0, 0.0, 1.0, 0.6),
        regime("stable_low", 12, 0.8, 0.0, 0.05, 0.05),
    ];
    let grid = GridSpec::uniform(18, 12, 5.0, 1.0)?;
    let (cube, membership) = synth_cube(&grid, 157, &regimes, 2)?;
    let labels = cluster_dtw(&cube, 0..157, 3, 11, DEFAULT_MAX_SWAPS)?;
    let planted = ClusterLabels::new(18, 12, 3, membership)?;
    println!("medoid cells: {:?}", labels.medoids.iter().map(|c| grid.coords(*c)).collect::<Vec<_>>());
    println!("agreement with planted regimes: {:.1}%", 100.0 * labels.agreement(&planted));
    for y in 0..grid.height() {
        let row: String = (0..grid.width())
            .map(|x| labels.labels[grid.index(x, y)].map_or('.', |l| char::from(b'0' + l as u8)))
            .collect();
        println!("{row}");
    }
    Ok(())
}
