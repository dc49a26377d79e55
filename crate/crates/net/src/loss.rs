//! Weighted pixel-wise L1 objective over the three network outputs.

use edei_core::Frame;

use crate::error::{NetError, Result};
use crate::graph::{Graph, Var};
use crate::tensor::{Scalar, Tensor};

/// Weights of the fused, enhanced and deblurred outputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lambdas {
    pub fused: f64,
    pub enhanced: f64,
    pub deblurred: f64,
}

impl Lambdas {
    pub const STAGE1: Lambdas = Lambdas::new(0.0, 1.0, 0.5);
    pub const STAGE2: Lambdas = Lambdas::new(1.0, 0.0, 0.0);

    pub const fn new(fused: f64, enhanced: f64, deblurred: f64) -> Self {
        Self {
            fused,
            enhanced,
            deblurred,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.fused, self.enhanced, self.deblurred];
        if all.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(NetError::config(format!(
                "loss weights must be finite and non-negative, got {all:?}"
            )));
        }
        Ok(())
    }
}

fn mean_abs(a: &Frame, b: &Frame) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(NetError::shape(format!(
            "loss operands {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Objective value on host frames.
pub fn loss(fused: &Frame, enhanced: &Frame, deblurred: &Frame, gt: &Frame, l: Lambdas) -> Result<f64> {
    Ok(l.fused * mean_abs(fused, gt)? + l.enhanced * mean_abs(enhanced, gt)? + l.deblurred * mean_abs(deblurred, gt)?)
}

/// Objective on the tape. Terms with zero weight are skipped, so an absent
/// fused output is allowed when its weight is zero.
pub fn loss_on_graph<S: Scalar>(
    g: &mut Graph<S>,
    fused: Option<Var>,
    enhanced: Var,
    deblurred: Var,
    gt: &Tensor<S>,
    l: Lambdas,
) -> Result<Var> {
    let mut terms = Vec::new();
    for (v, w) in [
        (fused, l.fused),
        (Some(enhanced), l.enhanced),
        (Some(deblurred), l.deblurred),
    ] {
        if w == 0.0 {
            continue;
        }
        let v = v.ok_or_else(|| NetError::config("fused output needed for a non-zero fused weight"))?;
        if g.value(v).shape() != gt.shape() {
            return Err(NetError::shape(format!(
                "prediction {:?} vs target {:?}",
                g.value(v).shape(),
                gt.shape()
            )));
        }
        let t = g.l1_mean(v, gt);
        terms.push((t, w));
    }
    Ok(g.weighted_sum(&terms))
}
