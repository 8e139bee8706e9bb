//! Finite-difference verification of reverse-mode gradients.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Compare the reverse-mode gradient of a scalar-valued map against central
/// finite differences at every input coordinate. Returns the maximum over
/// coordinates of |a - n| / max(1, |a|, |n|).
///
/// The map is re-run twice per coordinate, so keep probe inputs small.
pub fn grad_check<F>(f: F, input: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Config(format!(
            "grad_check: eps {eps} outside [1e-7, 1e-3]"
        )));
    }
    // Probe on a private grad-enabled copy so callers can pass plain data.
    let probe = input.detach().requiring_grad();
    let out = f(&probe)?;
    if out.numel() != 1 {
        return Err(Error::Shape(format!(
            "grad_check: map must be scalar-valued, got shape {:?}",
            out.shape()
        )));
    }
    if !out.is_finite() {
        return Err(Error::Train("grad_check: non-finite forward value".into()));
    }
    probe.zero_grad();
    out.backward()?;
    let analytic = probe.grad().unwrap_or_else(|| vec![0.0; probe.numel()]);

    let n = probe.numel();
    let mut max_err = 0.0f64;
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let fp = f(&probe)?.item();
        probe.data_mut()[i] = orig - eps;
        let fm = f(&probe)?.item();
        probe.data_mut()[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Train(format!(
                "grad_check: non-finite intermediate at coordinate {i} (f+={fp}, f-={fm})"
            )));
        }
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / 1.0_f64.max(a.abs()).max(numeric.abs());
        if err > max_err {
            max_err = err;
        }
    }
    Ok(max_err)
}
