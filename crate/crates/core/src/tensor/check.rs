use super::{Graph, Tensor, Var};
use crate::{Error, Result};

/// Largest discrepancy between reverse-mode gradients and central finite
/// differences of a scalar function of `params`.
///
/// `f` must build the same scalar from the leaves it is handed on every call.
/// Per element the error is `|analytic − numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(Error::invalid(format!("eps must lie in (0, 1e-3], got {eps}")));
    }
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let loss = f(&mut g, &vars)?;
    check_finite(g.value(loss).data()[0], "loss")?;
    g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(params)
        .map(|(v, p)| {
            g.grad(*v)
                .map(|t| t.data().to_vec())
                .unwrap_or_else(|| vec![0.0; p.len()])
        })
        .collect();

    let eval = |probe: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = probe.iter().map(|p| g.constant(p.clone())).collect();
        let out = f(&mut g, &vars)?;
        let v = g.value(out).data()[0];
        check_finite(v, "perturbed loss")?;
        Ok(v)
    };

    let mut probe: Vec<Tensor> = params.to_vec();
    let mut worst: f64 = 0.0;
    for (pi, grads) in analytic.iter().enumerate() {
        check_all_finite(grads)?;
        for (ei, a) in grads.iter().enumerate() {
            let orig = params[pi].data()[ei];
            probe[pi].data_mut()[ei] = orig + eps;
            let plus = eval(&probe)?;
            probe[pi].data_mut()[ei] = orig - eps;
            let minus = eval(&probe)?;
            probe[pi].data_mut()[ei] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}

fn check_finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} = {v}")))
    }
}

fn check_all_finite(vs: &[f64]) -> Result<()> {
    vs.iter().try_for_each(|v| check_finite(*v, "gradient"))
}
