//! Differentiable tensor operations.
//!
//! Everything here is a pure function from input tensors to a fresh output
//! tensor carrying its backward rule. Shape mismatches are rejected with a
//! diagnostic naming both shapes.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

fn check_same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "{op}: operand shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Elementwise a + b.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("add", a, b)?;
    let data: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, y)| x + y).collect();
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone(), b.clone()],
        Box::new(|args| {
            for p in args.parents {
                if p.requires_grad() {
                    let mut g = p.grad_buf();
                    for (gi, &og) in g.iter_mut().zip(args.out_grad) {
                        *gi += og;
                    }
                }
            }
        }),
    ))
}

/// Elementwise a - b.
pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("sub", a, b)?;
    let data: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, y)| x - y).collect();
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone(), b.clone()],
        Box::new(|args| {
            if args.parents[0].requires_grad() {
                let mut g = args.parents[0].grad_buf();
                for (gi, &og) in g.iter_mut().zip(args.out_grad) {
                    *gi += og;
                }
            }
            if args.parents[1].requires_grad() {
                let mut g = args.parents[1].grad_buf();
                for (gi, &og) in g.iter_mut().zip(args.out_grad) {
                    *gi -= og;
                }
            }
        }),
    ))
}

/// Hadamard product a ∘ b.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same_shape("mul", a, b)?;
    let data: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, y)| x * y).collect();
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone(), b.clone()],
        Box::new(|args| {
            let (pa, pb) = (&args.parents[0], &args.parents[1]);
            if pa.requires_grad() {
                let bd = pb.data();
                let mut g = pa.grad_buf();
                for i in 0..g.len() {
                    g[i] += args.out_grad[i] * bd[i];
                }
            }
            if pb.requires_grad() {
                let ad = pa.data();
                let mut g = pb.grad_buf();
                for i in 0..g.len() {
                    g[i] += args.out_grad[i] * ad[i];
                }
            }
        }),
    ))
}

/// c · a for a constant c.
pub fn scale(a: &Tensor, c: f64) -> Tensor {
    let data: Vec<f64> = a.data().iter().map(|x| c * x).collect();
    Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone()],
        Box::new(move |args| {
            if args.parents[0].requires_grad() {
                let mut g = args.parents[0].grad_buf();
                for (gi, &og) in g.iter_mut().zip(args.out_grad) {
                    *gi += c * og;
                }
            }
        }),
    )
}

/// a + c for a constant c.
pub fn add_scalar(a: &Tensor, c: f64) -> Tensor {
    let data: Vec<f64> = a.data().iter().map(|x| x + c).collect();
    Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone()],
        Box::new(|args| {
            if args.parents[0].requires_grad() {
                let mut g = args.parents[0].grad_buf();
                for (gi, &og) in g.iter_mut().zip(args.out_grad) {
                    *gi += og;
                }
            }
        }),
    )
}

/// 1 - a, used for gate complements.
pub fn ones_minus(a: &Tensor) -> Tensor {
    add_scalar(&scale(a, -1.0), 1.0)
}

/// Supported pointwise nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointwise {
    Sigmoid,
    Tanh,
    Relu,
}

/// Elementwise nonlinearity.
pub fn pointwise(a: &Tensor, kind: Pointwise) -> Tensor {
    let data: Vec<f64> = match kind {
        Pointwise::Sigmoid => a.data().iter().map(|&x| sigmoid_scalar(x)).collect(),
        Pointwise::Tanh => a.data().iter().map(|&x| x.tanh()).collect(),
        Pointwise::Relu => a.data().iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect(),
    };
    Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone()],
        Box::new(move |args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let mut g = p.grad_buf();
            match kind {
                Pointwise::Sigmoid => {
                    for i in 0..g.len() {
                        let y = args.out_data[i];
                        g[i] += args.out_grad[i] * y * (1.0 - y);
                    }
                }
                Pointwise::Tanh => {
                    for i in 0..g.len() {
                        let y = args.out_data[i];
                        g[i] += args.out_grad[i] * (1.0 - y * y);
                    }
                }
                Pointwise::Relu => {
                    let xd = p.data();
                    for i in 0..g.len() {
                        if xd[i] > 0.0 {
                            g[i] += args.out_grad[i];
                        }
                    }
                }
            }
        }),
    )
}

pub fn sigmoid(a: &Tensor) -> Tensor {
    pointwise(a, Pointwise::Sigmoid)
}

pub fn tanh(a: &Tensor) -> Tensor {
    pointwise(a, Pointwise::Tanh)
}

pub fn relu(a: &Tensor) -> Tensor {
    pointwise(a, Pointwise::Relu)
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax along one axis, stabilized by max subtraction.
pub fn softmax(a: &Tensor, axis: usize) -> Result<Tensor> {
    let shape = a.shape().to_vec();
    if axis >= shape.len() {
        return Err(Error::Shape(format!(
            "softmax: axis {axis} out of range for shape {shape:?}"
        )));
    }
    let axis_len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let src = a.data();
    let mut out = vec![0.0; src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * axis_len * inner + i;
            let mut max = f64::NEG_INFINITY;
            for k in 0..axis_len {
                max = max.max(src[base + k * inner]);
            }
            let mut sum = 0.0;
            for k in 0..axis_len {
                let e = (src[base + k * inner] - max).exp();
                out[base + k * inner] = e;
                sum += e;
            }
            for k in 0..axis_len {
                out[base + k * inner] /= sum;
            }
        }
    }
    drop(src);
    Ok(Tensor::from_op(
        shape,
        out,
        vec![a.clone()],
        Box::new(move |args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let mut g = p.grad_buf();
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * axis_len * inner + i;
                    let mut dot = 0.0;
                    for k in 0..axis_len {
                        let idx = base + k * inner;
                        dot += args.out_grad[idx] * args.out_data[idx];
                    }
                    for k in 0..axis_len {
                        let idx = base + k * inner;
                        g[idx] += args.out_data[idx] * (args.out_grad[idx] - dot);
                    }
                }
            }
        }),
    ))
}

/// Matrix product of a `[m,k]` and b `[k,n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ash, bsh) = (a.shape(), b.shape());
    if ash.len() != 2 || bsh.len() != 2 || ash[1] != bsh[0] {
        return Err(Error::Shape(format!(
            "matmul: incompatible shapes {ash:?} x {bsh:?}"
        )));
    }
    let (m, k, n) = (ash[0], ash[1], bsh[1]);
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    drop(ad);
    drop(bd);
    Ok(Tensor::from_op(
        vec![m, n],
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |args| {
            let (pa, pb) = (&args.parents[0], &args.parents[1]);
            if pa.requires_grad() {
                // dA = G · B^T
                let bd = pb.data();
                let mut g = pa.grad_buf();
                for i in 0..m {
                    for p in 0..k {
                        let mut acc = 0.0;
                        let grow = &args.out_grad[i * n..(i + 1) * n];
                        let brow = &bd[p * n..(p + 1) * n];
                        for j in 0..n {
                            acc += grow[j] * brow[j];
                        }
                        g[i * k + p] += acc;
                    }
                }
            }
            if pb.requires_grad() {
                // dB = A^T · G
                let ad = pa.data();
                let mut g = pb.grad_buf();
                for p in 0..k {
                    for i in 0..m {
                        let av = ad[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        let grow = &args.out_grad[i * n..(i + 1) * n];
                        let gbrow = &mut g[p * n..(p + 1) * n];
                        for j in 0..n {
                            gbrow[j] += av * grow[j];
                        }
                    }
                }
            }
        }),
    ))
}

/// Transpose of a 2-D tensor.
pub fn transpose2d(a: &Tensor) -> Result<Tensor> {
    let sh = a.shape();
    if sh.len() != 2 {
        return Err(Error::Shape(format!("transpose2d: expected rank 2, got {sh:?}")));
    }
    let (m, n) = (sh[0], sh[1]);
    let ad = a.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = ad[i * n + j];
        }
    }
    drop(ad);
    Ok(Tensor::from_op(
        vec![n, m],
        out,
        vec![a.clone()],
        Box::new(move |args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let mut g = p.grad_buf();
            for i in 0..m {
                for j in 0..n {
                    g[i * n + j] += args.out_grad[j * m + i];
                }
            }
        }),
    ))
}

/// Sum of all entries, as a shape-`[1]` tensor.
pub fn sum_all(a: &Tensor) -> Tensor {
    let s: f64 = a.data().iter().sum();
    Tensor::from_op(
        vec![1],
        vec![s],
        vec![a.clone()],
        Box::new(|args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let og = args.out_grad[0];
            let mut g = p.grad_buf();
            for gi in g.iter_mut() {
                *gi += og;
            }
        }),
    )
}

/// Mean over the spatial axes of a `[C,H,W]` tensor, producing `[C,1,1]`.
pub fn mean_spatial(a: &Tensor) -> Result<Tensor> {
    let sh = a.shape();
    if sh.len() != 3 {
        return Err(Error::Shape(format!("mean_spatial: expected [C,H,W], got {sh:?}")));
    }
    let (c, h, w) = (sh[0], sh[1], sh[2]);
    let hw = h * w;
    let ad = a.data();
    let out: Vec<f64> = (0..c)
        .map(|ci| ad[ci * hw..(ci + 1) * hw].iter().sum::<f64>() / hw as f64)
        .collect();
    drop(ad);
    Ok(Tensor::from_op(
        vec![c, 1, 1],
        out,
        vec![a.clone()],
        Box::new(move |args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let mut g = p.grad_buf();
            for ci in 0..c {
                let og = args.out_grad[ci] / hw as f64;
                for gi in g[ci * hw..(ci + 1) * hw].iter_mut() {
                    *gi += og;
                }
            }
        }),
    ))
}

/// Broadcast a `[C,1,1]` tensor to `[C,H,W]`.
pub fn broadcast_spatial(a: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let sh = a.shape();
    if sh.len() != 3 || sh[1] != 1 || sh[2] != 1 {
        return Err(Error::Shape(format!(
            "broadcast_spatial: expected [C,1,1], got {sh:?}"
        )));
    }
    let c = sh[0];
    let hw = h * w;
    let ad = a.data();
    let mut out = vec![0.0; c * hw];
    for ci in 0..c {
        out[ci * hw..(ci + 1) * hw].fill(ad[ci]);
    }
    drop(ad);
    Ok(Tensor::from_op(
        vec![c, h, w],
        out,
        vec![a.clone()],
        Box::new(move |args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let mut g = p.grad_buf();
            for ci in 0..c {
                g[ci] += args.out_grad[ci * hw..(ci + 1) * hw].iter().sum::<f64>();
            }
        }),
    ))
}

/// Concatenate `[C_i,H,W]` tensors along the channel axis.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::Shape("concat_channels: no inputs".into()));
    }
    let first = parts[0].shape();
    if first.len() != 3 {
        return Err(Error::Shape(format!(
            "concat_channels: expected [C,H,W], got {first:?}"
        )));
    }
    let (h, w) = (first[1], first[2]);
    let mut total_c = 0;
    for p in parts {
        let sh = p.shape();
        if sh.len() != 3 || sh[1] != h || sh[2] != w {
            return Err(Error::Shape(format!(
                "concat_channels: spatial mismatch: {first:?} vs {sh:?}"
            )));
        }
        total_c += sh[0];
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(total_c * hw);
    let mut channel_counts = Vec::with_capacity(parts.len());
    for p in parts {
        out.extend_from_slice(&p.data());
        channel_counts.push(p.shape()[0]);
    }
    Ok(Tensor::from_op(
        vec![total_c, h, w],
        out,
        parts.iter().map(|p| (*p).clone()).collect(),
        Box::new(move |args| {
            let mut offset = 0;
            for (p, &pc) in args.parents.iter().zip(&channel_counts) {
                let len = pc * hw;
                if p.requires_grad() {
                    let mut g = p.grad_buf();
                    for (gi, &og) in g.iter_mut().zip(&args.out_grad[offset..offset + len]) {
                        *gi += og;
                    }
                }
                offset += len;
            }
        }),
    ))
}

/// Stack T same-shaped `[C,h,w]` tensors along a new leading time axis.
pub fn stack_frames(frames: &[&Tensor]) -> Result<Tensor> {
    if frames.is_empty() {
        return Err(Error::Shape("stack_frames: no inputs".into()));
    }
    let sh = frames[0].shape().to_vec();
    if sh.len() != 3 {
        return Err(Error::Shape(format!("stack_frames: expected [C,h,w], got {sh:?}")));
    }
    for f in frames {
        if f.shape() != sh.as_slice() {
            return Err(Error::Shape(format!(
                "stack_frames: frame shape mismatch: {:?} vs {:?}",
                sh,
                f.shape()
            )));
        }
    }
    let per = sh.iter().product::<usize>();
    let mut out = Vec::with_capacity(frames.len() * per);
    for f in frames {
        out.extend_from_slice(&f.data());
    }
    let mut shape = vec![frames.len()];
    shape.extend_from_slice(&sh);
    Ok(Tensor::from_op(
        shape,
        out,
        frames.iter().map(|f| (*f).clone()).collect(),
        Box::new(move |args| {
            for (t, p) in args.parents.iter().enumerate() {
                if p.requires_grad() {
                    let mut g = p.grad_buf();
                    for (gi, &og) in g.iter_mut().zip(&args.out_grad[t * per..(t + 1) * per]) {
                        *gi += og;
                    }
                }
            }
        }),
    ))
}

/// Extract frame t of a `[T,C,h,w]` tensor as `[C,h,w]`.
pub fn index_frame(clip: &Tensor, t: usize) -> Result<Tensor> {
    let sh = clip.shape();
    if sh.len() != 4 {
        return Err(Error::Shape(format!("index_frame: expected [T,C,h,w], got {sh:?}")));
    }
    if t >= sh[0] {
        return Err(Error::Shape(format!(
            "index_frame: index {t} out of range for T={}",
            sh[0]
        )));
    }
    let per: usize = sh[1..].iter().product();
    let data = clip.data()[t * per..(t + 1) * per].to_vec();
    Ok(Tensor::from_op(
        sh[1..].to_vec(),
        data,
        vec![clip.clone()],
        Box::new(move |args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let mut g = p.grad_buf();
            for (gi, &og) in g[t * per..(t + 1) * per].iter_mut().zip(args.out_grad) {
                *gi += og;
            }
        }),
    ))
}

/// Rearrange `[T,C,h,w]` into a position-major matrix `[T·h·w, C]`.
pub fn flatten_positions(clip: &Tensor) -> Result<Tensor> {
    let sh = clip.shape();
    if sh.len() != 4 {
        return Err(Error::Shape(format!(
            "flatten_positions: expected [T,C,h,w], got {sh:?}"
        )));
    }
    let (t_len, c, h, w) = (sh[0], sh[1], sh[2], sh[3]);
    let hw = h * w;
    let src = clip.data();
    let mut out = vec![0.0; t_len * hw * c];
    for t in 0..t_len {
        for ci in 0..c {
            let base = (t * c + ci) * hw;
            for s in 0..hw {
                out[(t * hw + s) * c + ci] = src[base + s];
            }
        }
    }
    drop(src);
    Ok(Tensor::from_op(
        vec![t_len * hw, c],
        out,
        vec![clip.clone()],
        Box::new(move |args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let mut g = p.grad_buf();
            for t in 0..t_len {
                for ci in 0..c {
                    let base = (t * c + ci) * hw;
                    for s in 0..hw {
                        g[base + s] += args.out_grad[(t * hw + s) * c + ci];
                    }
                }
            }
        }),
    ))
}

/// Inverse of [`flatten_positions`]: `[T·h·w, C]` back to `[T,C,h,w]`.
pub fn unflatten_positions(flat: &Tensor, t_len: usize, h: usize, w: usize) -> Result<Tensor> {
    let sh = flat.shape();
    if sh.len() != 2 || sh[0] != t_len * h * w {
        return Err(Error::Shape(format!(
            "unflatten_positions: shape {sh:?} inconsistent with T={t_len}, h={h}, w={w}"
        )));
    }
    let c = sh[1];
    let hw = h * w;
    let src = flat.data();
    let mut out = vec![0.0; t_len * c * hw];
    for t in 0..t_len {
        for ci in 0..c {
            let base = (t * c + ci) * hw;
            for s in 0..hw {
                out[base + s] = src[(t * hw + s) * c + ci];
            }
        }
    }
    drop(src);
    Ok(Tensor::from_op(
        vec![t_len, c, h, w],
        out,
        vec![flat.clone()],
        Box::new(move |args| {
            let p = &args.parents[0];
            if !p.requires_grad() {
                return;
            }
            let mut g = p.grad_buf();
            for t in 0..t_len {
                for ci in 0..c {
                    let base = (t * c + ci) * hw;
                    for s in 0..hw {
                        g[(t * hw + s) * c + ci] += args.out_grad[base + s];
                    }
                }
            }
        }),
    ))
}
