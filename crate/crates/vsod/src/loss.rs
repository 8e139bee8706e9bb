//! Sigmoid cross-entropy on logits.

use crate::error::{Error, Result};
use crate::nn::ops::sigmoid_scalar;
use crate::nn::tensor::Tensor;

/// Mean sigmoid cross-entropy between logits and targets in `[0,1]`.
///
/// Computed in the numerically stable fused form
/// `max(z,0) - z*y + ln(1 + exp(-|z|))`, differentiable w.r.t. the logits;
/// targets are treated as constants. Soft targets (pseudo-labels) are valid.
pub fn bce_with_logits(logits: &Tensor, target: &Tensor) -> Result<Tensor> {
    if logits.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "bce_with_logits: logits {:?} vs target {:?}",
            logits.shape(),
            target.shape()
        )));
    }
    {
        let td = target.data();
        if let Some(bad) = td.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!(
                "bce_with_logits: target value {bad} outside [0,1]"
            )));
        }
    }
    let n = logits.numel() as f64;
    let zd = logits.data();
    let td = target.data();
    let mut acc = 0.0;
    for (&z, &y) in zd.iter().zip(td.iter()) {
        acc += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    }
    let mean = acc / n;
    drop(zd);
    drop(td);
    Ok(Tensor::from_op(
        vec![1],
        vec![mean],
        vec![logits.clone(), target.clone()],
        Box::new(move |args| {
            let z = &args.parents[0];
            if !z.requires_grad() {
                return;
            }
            let og = args.out_grad[0] / n;
            let zd = z.data();
            let td = args.parents[1].data();
            let mut g = z.grad_buf();
            for i in 0..g.len() {
                g[i] += og * (sigmoid_scalar(zd[i]) - td[i]);
            }
        }),
    ))
}
