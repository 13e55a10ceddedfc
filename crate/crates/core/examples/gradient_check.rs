//! Compare reverse-mode gradients of an unrolled ConvLSTM against central
//! finite differences.
//!
//! cargo run --release --example gradient_check

use std::time::Instant;

use crashcast::convlstm::{forward_sequence_graph, masked_mse_loss, ConvLSTMParams, ParamVars};
use crashcast::tensor::{grad_check, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> crashcast::Result<()> {
    for seed in 0..5 {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ConvLSTMParams::init(2, 3, 3, &mut rng)?;
        let inputs: Vec<Tensor> = (0..3)
            .map(|_| Tensor::new(&[2, 4, 4], (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect::<Result<_, _>>()?;
        let target: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..2.0)).collect();
        let leaves: Vec<Tensor> = params.tensors().into_iter().cloned().collect();
        let err = grad_check(
            |g, vars| {
                let pv = ParamVars::from_slice(vars);
                let xs: Vec<Var> = inputs.iter().map(|x| g.constant(x.clone())).collect();
                let pred = forward_sequence_graph(g, &xs, &pv)?;
                masked_mse_loss(g, pred, &target, &[true; 16])
            },
            &leaves,
            1e-5,
        )?;
        println!("seed {seed}: max relative error {err:.2e} in {:.2?}", started.elapsed());
    }
    Ok(())
}
