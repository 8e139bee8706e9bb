//! 2-D convolution (cross-correlation) with stride and dilation.

use crate::error::{Error, Result};
use crate::nn::params::{Init, ParamRegistry};
use crate::nn::tensor::Tensor;
use crate::rng::Rng;

/// Padding policy for [`conv2d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding chosen so spatial extent is preserved at stride 1.
    Same,
    /// Explicit symmetric zero padding.
    Explicit(usize),
}

/// Weights and hyperparameters of one convolution.
#[derive(Clone)]
pub struct ConvParams {
    /// Kernel of shape `[out_ch, in_ch, kH, kW]`.
    pub kernel: Tensor,
    /// Optional per-output-channel bias `[out_ch]`.
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub dilation: usize,
    pub padding: Padding,
}

impl ConvParams {
    /// Wrap existing tensors, validating the invariants.
    pub fn new(
        kernel: Tensor,
        bias: Option<Tensor>,
        stride: usize,
        dilation: usize,
        padding: Padding,
    ) -> Result<ConvParams> {
        let ks = kernel.shape();
        if ks.len() != 4 {
            return Err(Error::Shape(format!(
                "conv kernel must be [out,in,kH,kW], got {ks:?}"
            )));
        }
        if stride == 0 {
            return Err(Error::Config("conv stride must be >= 1".into()));
        }
        if dilation == 0 {
            return Err(Error::Config("conv dilation must be >= 1".into()));
        }
        if let Some(b) = &bias {
            if b.shape() != [ks[0]] {
                return Err(Error::Shape(format!(
                    "conv bias shape {:?} does not match out channels {}",
                    b.shape(),
                    ks[0]
                )));
            }
        }
        Ok(ConvParams { kernel, bias, stride, dilation, padding })
    }

    /// Register a freshly initialized convolution under `name`.
    #[allow(clippy::too_many_arguments)]
    pub fn create(
        reg: &mut ParamRegistry,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        ksize: usize,
        stride: usize,
        dilation: usize,
        with_bias: bool,
        init: Init,
        rng: &mut Rng,
    ) -> Result<ConvParams> {
        let kernel = reg.create(
            &format!("{name}.weight"),
            &[out_ch, in_ch, ksize, ksize],
            init,
            rng,
        )?;
        let bias = if with_bias {
            Some(reg.create(&format!("{name}.bias"), &[out_ch], Init::Zeros, rng)?)
        } else {
            None
        };
        ConvParams::new(kernel, bias, stride, dilation, Padding::Same)
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    /// Symmetric padding actually applied on each border.
    pub fn pad(&self) -> usize {
        match self.padding {
            Padding::Explicit(p) => p,
            // For odd kernels this preserves extent exactly at stride 1.
            Padding::Same => self.dilation * (self.kernel.shape()[2] - 1) / 2,
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        conv2d(input, self)
    }
}

fn out_extent(in_extent: usize, k: usize, stride: usize, dilation: usize, pad: usize) -> Result<usize> {
    let span = dilation * (k - 1) + 1;
    let padded = in_extent + 2 * pad;
    if padded < span {
        return Err(Error::Shape(format!(
            "conv input extent {in_extent} (+2*{pad} pad) smaller than dilated kernel span {span}"
        )));
    }
    Ok((padded - span) / stride + 1)
}

/// Cross-correlation of a `[C,H,W]` input with `params`, differentiable w.r.t.
/// input, kernel, and bias.
pub fn conv2d(input: &Tensor, params: &ConvParams) -> Result<Tensor> {
    let ish = input.shape();
    if ish.len() != 3 {
        return Err(Error::Shape(format!("conv2d: input must be [C,H,W], got {ish:?}")));
    }
    let ksh = params.kernel.shape();
    let (out_c, in_c, kh, kw) = (ksh[0], ksh[1], ksh[2], ksh[3]);
    if ish[0] != in_c {
        return Err(Error::Shape(format!(
            "conv2d: input channels {} do not match kernel input channels {} (input {ish:?}, kernel {ksh:?})",
            ish[0], in_c
        )));
    }
    let (h, w) = (ish[1], ish[2]);
    let (stride, dil, pad) = (params.stride, params.dilation, params.pad());
    let oh = out_extent(h, kh, stride, dil, pad)?;
    let ow = out_extent(w, kw, stride, dil, pad)?;

    let xd = input.data();
    let kd = params.kernel.data();
    let mut out = vec![0.0; out_c * oh * ow];
    forward_kernel(
        &xd, &kd, &mut out, in_c, h, w, out_c, kh, kw, oh, ow, stride, dil, pad,
    );
    if let Some(b) = &params.bias {
        let bd = b.data();
        for oc in 0..out_c {
            let bias = bd[oc];
            for v in out[oc * oh * ow..(oc + 1) * oh * ow].iter_mut() {
                *v += bias;
            }
        }
    }
    drop(xd);
    drop(kd);

    let mut parents = vec![input.clone(), params.kernel.clone()];
    if let Some(b) = &params.bias {
        parents.push(b.clone());
    }
    Ok(Tensor::from_op(
        vec![out_c, oh, ow],
        out,
        parents,
        Box::new(move |args| {
            let x = &args.parents[0];
            let k = &args.parents[1];
            let g = args.out_grad;
            if x.requires_grad() {
                let kd = k.data();
                let mut gx = x.grad_buf();
                backward_input(
                    g, &kd, &mut gx, in_c, h, w, out_c, kh, kw, oh, ow, stride, dil, pad,
                );
            }
            if k.requires_grad() {
                let xd = x.data();
                let mut gk = k.grad_buf();
                backward_kernel(
                    g, &xd, &mut gk, in_c, h, w, out_c, kh, kw, oh, ow, stride, dil, pad,
                );
            }
            if args.parents.len() == 3 && args.parents[2].requires_grad() {
                let mut gb = args.parents[2].grad_buf();
                for oc in 0..out_c {
                    gb[oc] += g[oc * oh * ow..(oc + 1) * oh * ow].iter().sum::<f64>();
                }
            }
        }),
    ))
}

/// Range of output columns whose sampled input column is in bounds for a
/// given kernel tap: 0 <= ox*stride - pad + kx*dil < w.
fn valid_ox_range(w: usize, ow: usize, stride: usize, pad: usize, kx_off: isize) -> (usize, usize) {
    // ix = ox*stride + kx_off - pad must lie in [0, w)
    let shift = kx_off - pad as isize;
    let lo = if shift >= 0 {
        0
    } else {
        ((-shift) as usize).div_ceil(stride)
    };
    let hi_num = w as isize - 1 - shift;
    if hi_num < 0 {
        return (1, 0); // empty
    }
    let hi = (hi_num as usize) / stride;
    (lo, hi.min(ow.saturating_sub(1)))
}

#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
fn forward_kernel(
    x: &[f64],
    k: &[f64],
    out: &mut [f64],
    in_c: usize,
    h: usize,
    w: usize,
    out_c: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    dil: usize,
    pad: usize,
) {
    for oc in 0..out_c {
        for ic in 0..in_c {
            let kbase = ((oc * in_c) + ic) * kh * kw;
            for ky in 0..kh {
                let y_off = (ky * dil) as isize - pad as isize;
                for kx in 0..kw {
                    let weight = k[kbase + ky * kw + kx];
                    if weight == 0.0 {
                        continue;
                    }
                    let x_off = (kx * dil) as isize - pad as isize;
                    let (lo, hi) = valid_ox_range(w, ow, stride, pad, (kx * dil) as isize);
                    if lo > hi {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = oy as isize * stride as isize + y_off;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = &x[(ic * h + iy as usize) * w..(ic * h + iy as usize + 1) * w];
                        let orow = &mut out[(oc * oh + oy) * ow..(oc * oh + oy + 1) * ow];
                        if stride == 1 {
                            let start = (lo as isize + x_off) as usize;
                            let src = &xrow[start..start + (hi - lo + 1)];
                            for (o, &v) in orow[lo..=hi].iter_mut().zip(src) {
                                *o += weight * v;
                            }
                        } else {
                            for ox in lo..=hi {
                                let ix = (ox * stride) as isize + x_off;
                                orow[ox] += weight * xrow[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
fn backward_input(
    g: &[f64],
    k: &[f64],
    gx: &mut [f64],
    in_c: usize,
    h: usize,
    w: usize,
    out_c: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    dil: usize,
    pad: usize,
) {
    for oc in 0..out_c {
        for ic in 0..in_c {
            let kbase = ((oc * in_c) + ic) * kh * kw;
            for ky in 0..kh {
                let y_off = (ky * dil) as isize - pad as isize;
                for kx in 0..kw {
                    let weight = k[kbase + ky * kw + kx];
                    if weight == 0.0 {
                        continue;
                    }
                    let x_off = (kx * dil) as isize - pad as isize;
                    let (lo, hi) = valid_ox_range(w, ow, stride, pad, (kx * dil) as isize);
                    if lo > hi {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = oy as isize * stride as isize + y_off;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let grow = &g[(oc * oh + oy) * ow..(oc * oh + oy + 1) * ow];
                        let gxrow =
                            &mut gx[(ic * h + iy as usize) * w..(ic * h + iy as usize + 1) * w];
                        if stride == 1 {
                            let start = (lo as isize + x_off) as usize;
                            let dst = &mut gxrow[start..start + (hi - lo + 1)];
                            for (d, &og) in dst.iter_mut().zip(&grow[lo..=hi]) {
                                *d += weight * og;
                            }
                        } else {
                            for ox in lo..=hi {
                                let ix = (ox * stride) as isize + x_off;
                                gxrow[ix as usize] += weight * grow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
fn backward_kernel(
    g: &[f64],
    x: &[f64],
    gk: &mut [f64],
    in_c: usize,
    h: usize,
    w: usize,
    out_c: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    dil: usize,
    pad: usize,
) {
    for oc in 0..out_c {
        for ic in 0..in_c {
            let kbase = ((oc * in_c) + ic) * kh * kw;
            for ky in 0..kh {
                let y_off = (ky * dil) as isize - pad as isize;
                for kx in 0..kw {
                    let x_off = (kx * dil) as isize - pad as isize;
                    let (lo, hi) = valid_ox_range(w, ow, stride, pad, (kx * dil) as isize);
                    if lo > hi {
                        continue;
                    }
                    let mut acc = 0.0;
                    for oy in 0..oh {
                        let iy = oy as isize * stride as isize + y_off;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let grow = &g[(oc * oh + oy) * ow..(oc * oh + oy + 1) * ow];
                        let xrow = &x[(ic * h + iy as usize) * w..(ic * h + iy as usize + 1) * w];
                        if stride == 1 {
                            let start = (lo as isize + x_off) as usize;
                            let src = &xrow[start..start + (hi - lo + 1)];
                            for (&og, &v) in grow[lo..=hi].iter().zip(src) {
                                acc += og * v;
                            }
                        } else {
                            for ox in lo..=hi {
                                let ix = (ox * stride) as isize + x_off;
                                acc += grow[ox] * xrow[ix as usize];
                            }
                        }
                    }
                    gk[kbase + ky * kw + kx] += acc;
                }
            }
        }
    }
}
