//! Step a ConvLSTM cell by hand and run a short sequence through the
//! readout.
//!
//! cargo run --example convlstm_cell

use crashcast::convlstm::{cell_step_traced, forward_sequence, CellState, ConvLSTMParams};
use crashcast::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> crashcast::Result<()> {
    // 1x1 grid, one channel, 1x1 kernels, input kernels set to one
    let mut p = ConvLSTMParams::zeros(1, 1, 1)?;
    for w in [&mut p.w_xi, &mut p.w_xf, &mut p.w_xo, &mut p.w_xc] {
        w.data_mut()[0] = 1.0;
    }
    let x = Tensor::full(&[1, 1, 1], 1.0);
    let t = cell_step_traced(&x, &CellState::zeros(1, 1, 1), &p)?;
    println!(
        "i={:.5} f={:.5} o={:.5} C={:.5} h={:.5}",
        t.input_gate.data()[0],
        t.forget_gate.data()[0],
        t.output_gate.data()[0],
        t.state.c.data()[0],
        t.state.h.data()[0]
    );

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = ConvLSTMParams::init(3, 8, 3, &mut rng)?;
    let frames: Vec<Tensor> = (0..8)
        .map(|s| {
            let data = (0..3 * 6 * 6).map(|v| ((v + 5 * s) as f64 * 0.3).sin()).collect();
            Tensor::new(&[3, 6, 6], data)
        })
        .collect::<Result<_, _>>()?;
    let out = forward_sequence(&frames, &p)?;
    let min = out.data().iter().cloned().fold(f64::INFINITY, f64::min);
    println!("prediction shape {:?}, smallest value {min:.4}", out.shape());
    Ok(())
}
