use super::ConvLSTMParams;
use crate::tensor::{Graph, Tensor, Var};
use crate::{Error, Result};

/// Hidden and cell state, each `[C_hidden, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Tensor,
    pub c: Tensor,
}

impl CellState {
    pub fn zeros(hidden: usize, height: usize, width: usize) -> Self {
        Self {
            h: Tensor::zeros(&[hidden, height, width]),
            c: Tensor::zeros(&[hidden, height, width]),
        }
    }
}

/// Gate activations of one step, for inspection.
#[derive(Debug, Clone)]
pub struct GateTrace {
    pub input_gate: Tensor,
    pub forget_gate: Tensor,
    pub output_gate: Tensor,
    pub state: CellState,
}

/// Parameters registered on a graph, in [`super::PARAM_NAMES`] order.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub w_xi: Var,
    pub w_hi: Var,
    pub w_xf: Var,
    pub w_hf: Var,
    pub w_xo: Var,
    pub w_ho: Var,
    pub w_xc: Var,
    pub w_hc: Var,
    pub b_i: Var,
    pub b_f: Var,
    pub b_o: Var,
    pub b_c: Var,
    pub readout_w: Var,
    pub readout_b: Var,
}

impl ParamVars {
    /// Adds every parameter as a leaf; `track` selects gradient tracking.
    pub fn register(g: &mut Graph, p: &ConvLSTMParams, track: bool) -> Self {
        let vars: Vec<Var> = p
            .tensors()
            .into_iter()
            .map(|t| {
                if track {
                    g.param(t.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect();
        Self::from_slice(&vars)
    }

    pub fn from_slice(v: &[Var]) -> Self {
        assert_eq!(v.len(), 14, "ConvLSTM has 14 parameter tensors");
        Self {
            w_xi: v[0],
            w_hi: v[1],
            w_xf: v[2],
            w_hf: v[3],
            w_xo: v[4],
            w_ho: v[5],
            w_xc: v[6],
            w_hc: v[7],
            b_i: v[8],
            b_f: v[9],
            b_o: v[10],
            b_c: v[11],
            readout_w: v[12],
            readout_b: v[13],
        }
    }

    pub fn all(&self) -> [Var; 14] {
        [
            self.w_xi,
            self.w_hi,
            self.w_xf,
            self.w_hf,
            self.w_xo,
            self.w_ho,
            self.w_xc,
            self.w_hc,
            self.b_i,
            self.b_f,
            self.b_o,
            self.b_c,
            self.readout_w,
            self.readout_b,
        ]
    }
}

fn gate_preactivation(g: &mut Graph, x: Var, h: Var, wx: Var, wh: Var, b: Var) -> Result<Var> {
    let from_x = g.conv2d_same(x, wx, Some(b))?;
    let from_h = g.conv2d_same(h, wh, None)?;
    g.add(from_x, from_h)
}

/// One ConvLSTM step on the graph. Returns `(i, f, o, h_t, C_t)`.
fn step_vars(g: &mut Graph, x: Var, h_prev: Var, c_prev: Var, p: &ParamVars) -> Result<[Var; 5]> {
    let zi = gate_preactivation(g, x, h_prev, p.w_xi, p.w_hi, p.b_i)?;
    let i = g.sigmoid(zi);
    let zf = gate_preactivation(g, x, h_prev, p.w_xf, p.w_hf, p.b_f)?;
    let f = g.sigmoid(zf);
    let zo = gate_preactivation(g, x, h_prev, p.w_xo, p.w_ho, p.b_o)?;
    let o = g.sigmoid(zo);
    let zc = gate_preactivation(g, x, h_prev, p.w_xc, p.w_hc, p.b_c)?;
    let candidate = g.tanh(zc);
    let keep = g.hadamard(f, c_prev)?;
    let write = g.hadamard(i, candidate)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.hadamard(o, tc)?;
    Ok([i, f, o, h, c])
}

/// Graph form of one cell step: `(h_t, C_t)` from `X_t` and `(h_{t-1}, C_{t-1})`.
pub fn cell_step_graph(g: &mut Graph, x: Var, h_prev: Var, c_prev: Var, p: &ParamVars) -> Result<(Var, Var)> {
    let [_, _, _, h, c] = step_vars(g, x, h_prev, c_prev, p)?;
    Ok((h, c))
}

fn check_step_shapes(x: &Tensor, prev: &CellState, params: &ConvLSTMParams) -> Result<()> {
    params.validate()?;
    let [c_in, hh, ww] = *x.shape() else {
        return Err(Error::shape(format!("input must be [C, H, W], got {:?}", x.shape())));
    };
    if c_in != params.in_channels() {
        return Err(Error::shape(format!(
            "input has {c_in} channels, parameters expect {}",
            params.in_channels()
        )));
    }
    let expect = [params.hidden(), hh, ww];
    if prev.h.shape() != expect || prev.c.shape() != expect {
        return Err(Error::shape(format!(
            "state must be {expect:?}, got h {:?} and C {:?}",
            prev.h.shape(),
            prev.c.shape()
        )));
    }
    Ok(())
}

/// One step with all intermediate gates exposed.
pub fn cell_step_traced(x: &Tensor, prev: &CellState, params: &ConvLSTMParams) -> Result<GateTrace> {
    check_step_shapes(x, prev, params)?;
    let mut g = Graph::new();
    let p = ParamVars::register(&mut g, params, false);
    let xv = g.constant(x.clone());
    let hv = g.constant(prev.h.clone());
    let cv = g.constant(prev.c.clone());
    let [i, f, o, h, c] = step_vars(&mut g, xv, hv, cv, &p)?;
    Ok(GateTrace {
        input_gate: g.value(i).clone(),
        forget_gate: g.value(f).clone(),
        output_gate: g.value(o).clone(),
        state: CellState {
            h: g.value(h).clone(),
            c: g.value(c).clone(),
        },
    })
}

pub fn cell_step(x: &Tensor, prev: &CellState, params: &ConvLSTMParams) -> Result<CellState> {
    Ok(cell_step_traced(x, prev, params)?.state)
}

/// Unrolls the cell over `inputs` from a zero state and reads out `[1, H, W]`.
pub fn forward_sequence_graph(g: &mut Graph, inputs: &[Var], p: &ParamVars) -> Result<Var> {
    let first = *inputs
        .first()
        .ok_or_else(|| Error::invalid("sequence needs at least one input step"))?;
    let shape = g.value(first).shape().to_vec();
    let [_, hh, ww] = shape[..] else {
        return Err(Error::shape(format!("input must be [C, H, W], got {shape:?}")));
    };
    let hidden = g.value(p.b_i).len();
    let mut h = g.constant(Tensor::zeros(&[hidden, hh, ww]));
    let mut c = g.constant(Tensor::zeros(&[hidden, hh, ww]));
    for &x in inputs {
        (h, c) = cell_step_graph(g, x, h, c, p)?;
    }
    let r = g.conv2d_same(h, p.readout_w, Some(p.readout_b))?;
    Ok(g.softplus(r))
}

pub fn forward_sequence(inputs: &[Tensor], params: &ConvLSTMParams) -> Result<Tensor> {
    params.validate()?;
    let mut g = Graph::new();
    let p = ParamVars::register(&mut g, params, false);
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    if let Some(t) = inputs.iter().find(|t| t.shape().len() != 3 || t.shape()[0] != params.in_channels()) {
        return Err(Error::shape(format!(
            "inputs must be [{}, H, W], got {:?}",
            params.in_channels(),
            t.shape()
        )));
    }
    let out = forward_sequence_graph(&mut g, &vars, &p)?;
    Ok(g.value(out).clone())
}

/// Mean squared error over cells that are masked in and non-null in `truth`.
pub fn masked_mse(pred: &[f64], truth: &[f64], mask: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() || pred.len() != mask.len() {
        return Err(Error::shape(format!(
            "pred {}, truth {}, mask {} differ in length",
            pred.len(),
            truth.len(),
            mask.len()
        )));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for ((p, t), m) in pred.iter().zip(truth).zip(mask) {
        if *m && !t.is_nan() {
            sum += (p - t) * (p - t);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("mask selects no valid cells"));
    }
    Ok(sum / count as f64)
}

/// Graph form of [`masked_mse`] against a constant target.
pub fn masked_mse_loss(g: &mut Graph, pred: Var, truth: &[f64], mask: &[bool]) -> Result<Var> {
    let shape = g.value(pred).shape().to_vec();
    if truth.len() != g.value(pred).len() || mask.len() != truth.len() {
        return Err(Error::shape("prediction, truth and mask differ in size"));
    }
    let valid: Vec<bool> = truth.iter().zip(mask).map(|(t, m)| *m && !t.is_nan()).collect();
    let count = valid.iter().filter(|v| **v).count();
    if count == 0 {
        return Err(Error::invalid("mask selects no valid cells"));
    }
    let target: Vec<f64> = truth
        .iter()
        .zip(&valid)
        .map(|(t, v)| if *v { *t } else { 0.0 })
        .collect();
    let weight: Vec<f64> = valid
        .iter()
        .map(|v| if *v { 1.0 / count as f64 } else { 0.0 })
        .collect();
    let tv = g.constant(Tensor::new(&shape, target)?);
    let wv = g.constant(Tensor::new(&shape, weight)?);
    let diff = g.sub(pred, tv)?;
    let sq = g.hadamard(diff, diff)?;
    let weighted = g.hadamard(sq, wv)?;
    Ok(g.sum(weighted))
}
