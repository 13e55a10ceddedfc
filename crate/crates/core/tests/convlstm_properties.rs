use crashcast::convlstm::{cell_step_traced, forward_sequence, train_region, CellState, ConvLSTMParams, RegionFit, TrainConfig};
use crashcast::cube::{chronological_split, synth_cube, GridSpec, RegimeSpec};
use crashcast::ensemble::Window;
use crashcast::tensor::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_and_state_bounds(seed in any::<u64>(), scale in 0.1..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ConvLSTMParams::init(2, 3, 3, &mut rng).unwrap();
        for t in p.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        let x = random_tensor(&mut rng, &[2, 4, 4], 3.0);
        let prev = CellState {
            h: random_tensor(&mut rng, &[3, 4, 4], 1.0),
            c: random_tensor(&mut rng, &[3, 4, 4], 4.0),
        };
        let tr = cell_step_traced(&x, &prev, &p).unwrap();
        for gate in [&tr.input_gate, &tr.forget_gate, &tr.output_gate] {
            // (0, 1) in exact arithmetic; f64 sigmoid saturates to the endpoints
            prop_assert!(gate.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        for (c, c0) in tr.state.c.data().iter().zip(prev.c.data()) {
            prop_assert!(c.abs() <= c0.abs() + 1.0);
        }
    }

    #[test]
    fn sequence_output_is_positive(seed in any::<u64>(), steps in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ConvLSTMParams::init(2, 2, 3, &mut rng).unwrap();
        let xs: Vec<Tensor> = (0..steps).map(|_| random_tensor(&mut rng, &[2, 3, 5], 2.0)).collect();
        let out = forward_sequence(&xs, &p).unwrap();
        prop_assert_eq!(out.shape(), &[1, 3, 5]);
        prop_assert!(out.data().iter().all(|v| *v > 0.0));
    }
}

fn small_cube(noise: f64) -> crashcast::cube::SpaceTimeCube {
    let grid = GridSpec::uniform(4, 4, 1.0, 1.0).unwrap();
    let r = RegimeSpec {
        name: "r".into(),
        x0: 0,
        y0: 0,
        width: 4,
        height: 4,
        level: 1.0,
        slope: 0.0,
        amplitude: 0.5,
        noise,
        exposure: 1.0,
    };
    synth_cube(&grid, 60, &[r], 4).unwrap().0
}

#[test]
fn seed_fully_determines_training() {
    let cube = small_cube(0.2);
    let split = chronological_split(60, 10, 0.1).unwrap();
    let cfg = TrainConfig { lookback: 4, hidden_channels: 2, epochs: 3, seed: 9, ..TrainConfig::default() };
    let w = Window::whole(cube.grid());
    let run = || match train_region(&cube, &w, &split, &cfg).unwrap() {
        RegionFit::Trained(t) => t,
        RegionFit::Skipped { .. } => panic!("skipped"),
    };
    let (a, b) = (run(), run());
    assert_eq!(a.params, b.params);
    assert_eq!(a.loss_history, b.loss_history);
    let other = match train_region(&cube, &w, &split, &TrainConfig { seed: 10, ..cfg.clone() }).unwrap() {
        RegionFit::Trained(t) => t,
        RegionFit::Skipped { .. } => panic!("skipped"),
    };
    assert_ne!(a.params, other.params);
}

#[test]
fn noise_free_training_loss_falls() {
    let cube = small_cube(0.0);
    let split = chronological_split(60, 10, 0.1).unwrap();
    let cfg = TrainConfig { lookback: 4, hidden_channels: 3, epochs: 15, ..TrainConfig::default() };
    let RegionFit::Trained(t) = train_region(&cube, &Window::whole(cube.grid()), &split, &cfg).unwrap() else {
        panic!("skipped");
    };
    assert!(t.loss_history.iter().all(|l| l.is_finite()));
    assert!(t.loss_history.last().unwrap() < t.loss_history.first().unwrap());
}
