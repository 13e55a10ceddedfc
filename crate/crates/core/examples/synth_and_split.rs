//! Generate a seeded synthetic cube, split it chronologically and round-trip
//! it through the on-disk archive.
//!
//! cargo run --example synth_and_split

use crashcast::cube::{chronological_split, load_cube, save_cube, synth_cube, GridSpec, RegimeSpec};

fn main() -> crashcast::Result<()> {
    let grid = GridSpec::uniform(8, 6, 5.0, 1.0)?;
    let regimes = [
        RegimeSpec {
            name: "rising".into(),
            x0: 0,
            y0: 0,
            width: 4,
            height: 6,
            level: 0.5,
            slope: 0.01,
            amplitude: 0.2,
            noise: 0.05,
            exposure: 1.0,
        },
        RegimeSpec {
            name: "busy".into(),
            x0: 4,
            y0: 0,
            width: 4,
            height: 6,
            level: 3.0,
            slope: 0.0,
            amplitude: 1.0,
            noise: 0.5,
            exposure: 3.0,
        },
    ];
    let (cube, membership) = synth_cube(&grid, 209, &regimes, 1)?;
    println!("cube: {}x{} cells, {} weeks", grid.width(), grid.height(), cube.weeks());
    println!("features: {:?}", cube.features().iter().map(|f| &f.name).collect::<Vec<_>>());
    println!("cell (5, 2) is in regime {:?}", membership[grid.index(5, 2)]);

    for vf in [0.1, 0.0] {
        let s = chronological_split(209, 52, vf)?;
        println!(
            "vf={vf}: train {:?} ({}), validation {:?} ({}), test {:?} ({})",
            s.train,
            s.train.len(),
            s.validation,
            s.validation.len(),
            s.test,
            s.test.len()
        );
    }

    let dir = std::env::temp_dir().join("crashcast-synth-example");
    save_cube(&dir, &cube, None)?;
    let back = load_cube(&dir)?;
    println!("archive round trip equal: {}", back == cube);
    Ok(())
}
