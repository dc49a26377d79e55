//! Central finite-difference gradient checks in double precision.

use crate::graph::{Graph, Var};
use crate::model::EdeiNet;
use crate::params::Bound;
use crate::tensor::Tensor;

/// Relative error with a small floor so that two vanishing gradients agree.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Clone, Debug, Default)]
pub struct GradReport {
    /// `(name, flat index, analytic, numeric)` for every checked entry.
    pub entries: Vec<(String, usize, f64, f64)>,
}

impl GradReport {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fraction of entries with relative error below `tol`.
    pub fn pass_rate(&self, tol: f64) -> f64 {
        let ok = self.entries.iter().filter(|e| relative_error(e.2, e.3) < tol).count();
        ok as f64 / self.entries.len().max(1) as f64
    }

    pub fn worst(&self) -> Option<&(String, usize, f64, f64)> {
        self.entries
            .iter()
            .max_by(|a, b| relative_error(a.2, a.3).total_cmp(&relative_error(b.2, b.3)))
    }
}

/// Compares the gradient of a scalar function of `inputs` against central differences.
pub fn check_inputs(inputs: &[Tensor<f64>], f: &dyn Fn(&mut Graph<f64>, &[Var]) -> Var, h: f64) -> GradReport {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars);
    let grads = g.backward(out);
    let eval = |ins: &[Tensor<f64>]| {
        let mut g = Graph::new();
        let vs: Vec<Var> = ins.iter().map(|t| g.constant(t.clone())).collect();
        let o = f(&mut g, &vs);
        g.value(o).data()[0]
    };
    let mut report = GradReport::default();
    let mut work = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape()));
        for j in 0..inputs[i].len() {
            let x0 = work[i].data()[j];
            work[i].data_mut()[j] = x0 + h;
            let up = eval(&work);
            work[i].data_mut()[j] = x0 - h;
            let dn = eval(&work);
            work[i].data_mut()[j] = x0;
            report
                .entries
                .push((format!("input{i}"), j, analytic.data()[j], (up - dn) / (2.0 * h)));
        }
    }
    report
}

/// Checks every parameter entry of `net` for a scalar `loss`.
pub fn check_params(
    net: &mut EdeiNet<f64>,
    loss: &dyn Fn(&EdeiNet<f64>, &mut Graph<f64>, &Bound) -> Var,
    h: f64,
) -> GradReport {
    let ids: Vec<_> = net.params().ids().collect();
    let analytic: Vec<Tensor<f64>> = {
        let mut g = Graph::new();
        let p = net.params().bind(&mut g, |_| true);
        let out = loss(net, &mut g, &p);
        let grads = g.backward(out);
        ids.iter()
            .map(|&id| {
                grads
                    .get(p.var(id))
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(net.params().get(id).shape()))
            })
            .collect()
    };
    let eval = |net: &EdeiNet<f64>| {
        let mut g = Graph::new();
        let p = net.params().bind(&mut g, |_| false);
        let out = loss(net, &mut g, &p);
        g.value(out).data()[0]
    };
    let mut report = GradReport::default();
    for (k, &id) in ids.iter().enumerate() {
        let name = net.params().name(id).to_string();
        for j in 0..net.params().get(id).len() {
            let x0 = net.params().get(id).data()[j];
            net.params_mut().get_mut(id).data_mut()[j] = x0 + h;
            let up = eval(net);
            net.params_mut().get_mut(id).data_mut()[j] = x0 - h;
            let dn = eval(net);
            net.params_mut().get_mut(id).data_mut()[j] = x0;
            report
                .entries
                .push((name.clone(), j, analytic[k].data()[j], (up - dn) / (2.0 * h)));
        }
    }
    report
}
