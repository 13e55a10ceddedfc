//! ConvLSTM cell, sequence model and single-region trainer.
//!
//! Gate equations (no peephole terms), with `*` a zero-padded "same"
//! convolution and `⊙` the elementwise product:
//!
//! ```text
//! i_t = σ(w_xi * X_t + w_hi * h_{t-1} + b_i)
//! f_t = σ(w_xf * X_t + w_hf * h_{t-1} + b_f)
//! o_t = σ(w_xo * X_t + w_ho * h_{t-1} + b_o)
//! C_t = f_t ⊙ C_{t-1} + i_t ⊙ tanh(w_xc * X_t + w_hc * h_{t-1} + b_c)
//! h_t = o_t ⊙ tanh(C_t)
//! ```
//!
//! A sequence of `L` inputs is unrolled from a zero state and the last
//! hidden state is read out by a 1×1 convolution followed by softplus.

mod archive;
mod cell;
mod train;

pub use archive::{load_model, save_model, MODEL_FORMAT};
pub use cell::{
    cell_step, cell_step_graph, cell_step_traced, forward_sequence, forward_sequence_graph,
    masked_mse, masked_mse_loss, CellState, GateTrace, ParamVars,
};
pub use train::{
    predict_week, train_region, Adam, RegionFit, RegionInputs, Scaling, TrainConfig,
    TrainedRegion, ValidationSource,
};

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::tensor::Tensor;
use crate::{Error, Result};

pub const PARAM_NAMES: [&str; 14] = [
    "w_xi", "w_hi", "w_xf", "w_hf", "w_xo", "w_ho", "w_xc", "w_hc", "b_i", "b_f", "b_o", "b_c",
    "readout_w", "readout_b",
];

/// The eight gate kernels, four gate biases and the 1×1 readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLSTMParams {
    pub w_xi: Tensor,
    pub w_hi: Tensor,
    pub w_xf: Tensor,
    pub w_hf: Tensor,
    pub w_xo: Tensor,
    pub w_ho: Tensor,
    pub w_xc: Tensor,
    pub w_hc: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_o: Tensor,
    pub b_c: Tensor,
    pub readout_w: Tensor,
    pub readout_b: Tensor,
}

impl ConvLSTMParams {
    pub fn zeros(in_channels: usize, hidden: usize, k: usize) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::invalid(format!("kernel size must be odd, got {k}")));
        }
        if in_channels == 0 || hidden == 0 {
            return Err(Error::invalid("channel counts must be at least 1"));
        }
        let wx = || Tensor::zeros(&[hidden, in_channels, k, k]);
        let wh = || Tensor::zeros(&[hidden, hidden, k, k]);
        let b = || Tensor::zeros(&[hidden]);
        Ok(Self {
            w_xi: wx(),
            w_hi: wh(),
            w_xf: wx(),
            w_hf: wh(),
            w_xo: wx(),
            w_ho: wh(),
            w_xc: wx(),
            w_hc: wh(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: b(),
            readout_w: Tensor::zeros(&[1, hidden, 1, 1]),
            readout_b: Tensor::zeros(&[1]),
        })
    }

    /// Uniform ±1/√fan_in kernels, forget-gate bias 1, other biases 0.
    pub fn init<R: Rng>(in_channels: usize, hidden: usize, k: usize, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(in_channels, hidden, k)?;
        let fill = |t: &mut Tensor, fan_in: usize, rng: &mut R| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            t.data_mut().iter_mut().for_each(|v| *v = dist.sample(rng));
        };
        let fan_x = in_channels * k * k;
        let fan_h = hidden * k * k;
        fill(&mut p.w_xi, fan_x, rng);
        fill(&mut p.w_hi, fan_h, rng);
        fill(&mut p.w_xf, fan_x, rng);
        fill(&mut p.w_hf, fan_h, rng);
        fill(&mut p.w_xo, fan_x, rng);
        fill(&mut p.w_ho, fan_h, rng);
        fill(&mut p.w_xc, fan_x, rng);
        fill(&mut p.w_hc, fan_h, rng);
        fill(&mut p.readout_w, hidden, rng);
        p.b_f.data_mut().fill(1.0);
        Ok(p)
    }

    pub fn in_channels(&self) -> usize {
        self.w_xi.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w_xi.shape()[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.w_xi.shape()[2]
    }

    pub fn tensors(&self) -> [&Tensor; 14] {
        [
            &self.w_xi,
            &self.w_hi,
            &self.w_xf,
            &self.w_hf,
            &self.w_xo,
            &self.w_ho,
            &self.w_xc,
            &self.w_hc,
            &self.b_i,
            &self.b_f,
            &self.b_o,
            &self.b_c,
            &self.readout_w,
            &self.readout_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 14] {
        [
            &mut self.w_xi,
            &mut self.w_hi,
            &mut self.w_xf,
            &mut self.w_hf,
            &mut self.w_xo,
            &mut self.w_ho,
            &mut self.w_xc,
            &mut self.w_hc,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
            &mut self.readout_w,
            &mut self.readout_b,
        ]
    }

    /// Rebuilds parameters from tensors in [`PARAM_NAMES`] order.
    pub fn from_tensors(mut ts: Vec<Tensor>) -> Result<Self> {
        if ts.len() != 14 {
            return Err(Error::invalid(format!("expected 14 tensors, got {}", ts.len())));
        }
        let mut next = || ts.remove(0);
        let p = Self {
            w_xi: next(),
            w_hi: next(),
            w_xf: next(),
            w_hf: next(),
            w_xo: next(),
            w_ho: next(),
            w_xc: next(),
            w_hc: next(),
            b_i: next(),
            b_f: next(),
            b_o: next(),
            b_c: next(),
            readout_w: next(),
            readout_b: next(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.w_xi.shape();
        let [hidden, c_in, k, k2] = *shape else {
            return Err(Error::shape(format!("w_xi must have 4 axes, got {shape:?}")));
        };
        if k != k2 || k % 2 == 0 {
            return Err(Error::shape(format!("kernels must be square and odd, got {k}x{k2}")));
        }
        let expect_x = [hidden, c_in, k, k];
        let expect_h = [hidden, hidden, k, k];
        for (name, t) in PARAM_NAMES.iter().zip(self.tensors()) {
            let expected: &[usize] = match *name {
                "w_xi" | "w_xf" | "w_xo" | "w_xc" => &expect_x,
                "w_hi" | "w_hf" | "w_ho" | "w_hc" => &expect_h,
                "readout_w" => &[1, hidden, 1, 1],
                "readout_b" => &[1],
                _ => &[hidden],
            };
            if t.shape() != expected {
                return Err(Error::shape(format!(
                    "{name} has shape {:?}, expected {expected:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}
