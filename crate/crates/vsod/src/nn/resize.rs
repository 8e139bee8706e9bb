//! Corner-aligned bilinear resampling.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Resize a `[C,H,W]` tensor to `[C,out_h,out_w]` with corner-aligned bilinear
/// interpolation. Same-size calls are an exact pass-through.
pub fn bilinear_resize(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let sh = input.shape();
    if sh.len() != 3 {
        return Err(Error::Shape(format!(
            "bilinear_resize: input must be [C,H,W], got {sh:?}"
        )));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::Config(format!(
            "bilinear_resize: target size {out_h}x{out_w} must be positive"
        )));
    }
    let (c, h, w) = (sh[0], sh[1], sh[2]);
    if out_h == h && out_w == w {
        // exact identity
        return Ok(Tensor::from_op(
            sh.to_vec(),
            input.to_vec(),
            vec![input.clone()],
            Box::new(|args| {
                let p = &args.parents[0];
                if p.requires_grad() {
                    let mut g = p.grad_buf();
                    for (gi, &og) in g.iter_mut().zip(args.out_grad) {
                        *gi += og;
                    }
                }
            }),
        ));
    }

    let taps_y = axis_taps(h, out_h);
    let taps_x = axis_taps(w, out_w);
    let src = input.data();
    let mut out = vec![0.0; c * out_h * out_w];
    for ci in 0..c {
        let plane = &src[ci * h * w..(ci + 1) * h * w];
        let oplane = &mut out[ci * out_h * out_w..(ci + 1) * out_h * out_w];
        for (oy, &(y0, y1, wy)) in taps_y.iter().enumerate() {
            for (ox, &(x0, x1, wx)) in taps_x.iter().enumerate() {
                let v00 = plane[y0 * w + x0];
                let v01 = plane[y0 * w + x1];
                let v10 = plane[y1 * w + x0];
                let v11 = plane[y1 * w + x1];
                let top = v00 + wx * (v01 - v00);
                let bot = v10 + wx * (v11 - v10);
                oplane[oy * out_w + ox] = top + wy * (bot - top);
            }
        }
    }
    drop(src);
    Ok(Tensor::from_op(
        vec![c, out_h, out_w],
        out,
        vec![input.clone()],
        Box::new(move |args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let mut g = p.grad_buf();
            for ci in 0..c {
                let gplane = &mut g[ci * h * w..(ci + 1) * h * w];
                let ogplane = &args.out_grad[ci * out_h * out_w..(ci + 1) * out_h * out_w];
                for (oy, &(y0, y1, wy)) in taps_y.iter().enumerate() {
                    for (ox, &(x0, x1, wx)) in taps_x.iter().enumerate() {
                        let og = ogplane[oy * out_w + ox];
                        gplane[y0 * w + x0] += og * (1.0 - wy) * (1.0 - wx);
                        gplane[y0 * w + x1] += og * (1.0 - wy) * wx;
                        gplane[y1 * w + x0] += og * wy * (1.0 - wx);
                        gplane[y1 * w + x1] += og * wy * wx;
                    }
                }
            }
        }),
    ))
}

/// For each output index, the two source indices and the interpolation
/// weight of the second one. Corner-aligned: output 0 maps to source 0 and
/// output end maps to source end.
fn axis_taps(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let mut taps = Vec::with_capacity(out_len);
    if in_len == 1 {
        taps.resize(out_len, (0, 0, 0.0));
        return taps;
    }
    let scale = if out_len == 1 {
        0.0
    } else {
        (in_len - 1) as f64 / (out_len - 1) as f64
    };
    for o in 0..out_len {
        let pos = o as f64 * scale;
        let lo = pos.floor() as usize;
        let lo = lo.min(in_len - 2);
        let frac = pos - lo as f64;
        taps.push((lo, lo + 1, frac));
    }
    taps
}
