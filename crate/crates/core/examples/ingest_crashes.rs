//! Turn crash records into a road-length-normalised EPDO cube.
//!
//! cargo run --example ingest_crashes

use std::io::Cursor;
use std::path::Path;

use crashcast::cube::{build_cube, parse_crash_csv, GridSpec, SeverityWeights};

const CRASHES: &str = "\
week_index,cell_x,cell_y,severity,inclement_weather
0,0,0,O,true
0,0,0,O,true
0,0,0,B,true
0,1,0,K,false
1,1,0,A,true
2,0,1,C,true
";

fn main() -> crashcast::Result<()> {
    let records = parse_crash_csv(Cursor::new(CRASHES), Path::new("inline.csv"))?;
    // cell (1, 1) has no road and stays null
    let grid = GridSpec::new(2, 2, 5.0, vec![1.0, 2.5, 0.5, 0.0])?;
    let weights = SeverityWeights::new(12.0, 12.0, 3.0, 3.0, 1.0)?;
    let cube = build_cube(&records, &grid, &weights, 3)?;
    for cell in 0..grid.n_cells() {
        let (x, y) = grid.coords(cell);
        let series: Vec<String> = (0..cube.weeks())
            .map(|t| cube.value(cell, t).map_or("null".into(), |v| format!("{v:.2}")))
            .collect();
        println!("cell ({x}, {y}): {}", series.join(" "));
    }

    let bad = "week_index,cell_x,cell_y,severity,inclement_weather\n3,0,1,X,true\n";
    if let Err(e) = parse_crash_csv(Cursor::new(bad), Path::new("bad.csv")) {
        println!("rejected: {e}");
    }
    Ok(())
}
