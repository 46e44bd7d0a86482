//! Central finite differences against autograd, for float64 networks.

use candle_core::{Tensor, Var};

pub struct GradReport {
    pub checked: usize,
    /// Coordinates with a kink (ReLU, |·|) inside the difference stencil.
    pub skipped: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

// gradients below the floor count as zero and are compared absolutely; the
// floor covers central-difference rounding noise: at least ε·|L|/h, and in
// practice ~1e-10 once instance norm cancels large intermediates
const ZERO_GRAD: f64 = 1e-6;
const KINK_TOL: f64 = 1e-4;

fn value(t: &Tensor) -> f64 {
    t.to_scalar::<f64>().expect("f64 scalar loss")
}

/// Compare `d loss / d var[i]` with `(f(θ+h) − f(θ−h)) / 2h` at `coords`
/// flat indices of each named variable.
pub fn check(
    vars: &[(String, Var)],
    coords_per_var: usize,
    h: f64,
    loss: &dyn Fn() -> Tensor,
) -> GradReport {
    let l = loss();
    let floor = ZERO_GRAD.max(1e3 * f64::EPSILON * value(&l).abs() / h);
    let grads = l.backward().expect("backward");
    let mut report = GradReport { checked: 0, skipped: 0, max_rel_err: 0.0, worst: String::new() };
    for (name, var) in vars {
        let n = var.elem_count();
        let analytic: Vec<f64> = match grads.get(var.as_tensor()) {
            Some(g) => g.flatten_all().unwrap().to_vec1().unwrap(),
            None => vec![0.0; n],
        };
        let base: Vec<f64> = var.as_tensor().flatten_all().unwrap().to_vec1().unwrap();
        let dims = var.dims().to_vec();
        let step = (n / coords_per_var).max(1);
        for i in (0..n).step_by(step).take(coords_per_var) {
            let at = |delta: f64| {
                let mut v = base.clone();
                v[i] += delta;
                var.set(&Tensor::from_vec(v, dims.as_slice(), var.device()).unwrap()).unwrap();
                value(&loss())
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let fine = (at(h / 10.0) - at(-h / 10.0)) / (0.2 * h);
            var.set(&Tensor::from_vec(base.clone(), dims.as_slice(), var.device()).unwrap()).unwrap();
            let rel = |x: f64, y: f64| {
                let scale = x.abs().max(y.abs());
                (x - y).abs() / scale.max(floor)
            };
            // on a smooth stretch the two step sizes agree to O(h²)
            if rel(numeric, fine) > KINK_TOL {
                report.skipped += 1;
                continue;
            }
            let a = analytic[i];
            let err = rel(a, numeric);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = format!("{name}[{i}] autograd {a:.6e} numeric {numeric:.6e}");
            }
        }
    }
    report
}

/// Up to `count` weight tensors under `prefix`, spread across the network.
pub fn pick_vars(named: &std::collections::BTreeMap<String, Var>, prefix: &str, count: usize) -> Vec<(String, Var)> {
    let all: Vec<_> = named
        .iter()
        .filter(|(k, _)| k.starts_with(prefix) && k.ends_with("weight"))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if all.len() <= count {
        return all;
    }
    (0..count).map(|j| all[j * (all.len() - 1) / (count - 1).max(1)].clone()).collect()
}
