//! Optical flow fields, pluggable estimation, and backward mask warping.
//!
//! Flow orientation convention: a field is anchored at the *target* frame and
//! points to the *source* — the vector at target pixel p names the source
//! position p + flow(p) that backward sampling reads. Estimators therefore
//! answer "where did this target pixel come from in the source frame".

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::spatial::Frame;

/// Geometry of a synthetic moving shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeGeometry {
    Disk { radius: f64 },
    Rect { half_w: f64, half_h: f64 },
}

/// A synthetic shape's geometry and center position (x, y) in one frame.
/// Carried on synthetic frames so the oracle estimator can reconstruct the
/// exact motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeState {
    pub geometry: ShapeGeometry,
    pub center: (f64, f64),
}

impl ShapeState {
    /// Hard membership test at a pixel center.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.center;
        match self.geometry {
            ShapeGeometry::Disk { radius } => {
                let (dx, dy) = (x - cx, y - cy);
                dx * dx + dy * dy <= radius * radius
            }
            ShapeGeometry::Rect { half_w, half_h } => {
                (x - cx).abs() <= half_w && (y - cy).abs() <= half_h
            }
        }
    }
}

/// Per-pixel displacement field `[2,H,W]`; channel 0 is the horizontal
/// component u, channel 1 the vertical component v, in pixel units.
#[derive(Clone)]
pub struct FlowField {
    vectors: Tensor,
}

impl FlowField {
    pub fn new(vectors: Tensor) -> Result<FlowField> {
        let sh = vectors.shape();
        if sh.len() != 3 || sh[0] != 2 {
            return Err(Error::Shape(format!("flow field must be [2,H,W], got {sh:?}")));
        }
        let (h, w) = (sh[1] as f64, sh[2] as f64);
        {
            let d = vectors.data();
            let hw = sh[1] * sh[2];
            for (i, &v) in d.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Flow(format!("non-finite flow component at index {i}")));
                }
                let limit = if i < hw { w } else { h };
                if v.abs() > limit {
                    return Err(Error::Flow(format!(
                        "flow component {v} exceeds the frame extent {limit}"
                    )));
                }
            }
        }
        Ok(FlowField { vectors })
    }

    pub fn zeros(h: usize, w: usize) -> FlowField {
        FlowField { vectors: Tensor::zeros(&[2, h, w]) }
    }

    pub fn vectors(&self) -> &Tensor {
        &self.vectors
    }

    pub fn height(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.vectors.shape()[2]
    }
}

/// Hard {0,1} labels of shape `[1,H,W]`.
#[derive(Debug, Clone)]
pub struct BinaryMask {
    values: Tensor,
}

impl BinaryMask {
    pub fn new(values: Tensor) -> Result<BinaryMask> {
        let sh = values.shape();
        if sh.len() != 3 || sh[0] != 1 {
            return Err(Error::Shape(format!("binary mask must be [1,H,W], got {sh:?}")));
        }
        if let Some(bad) = values.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Data(format!("mask value {bad} is not strictly 0 or 1")));
        }
        Ok(BinaryMask { values })
    }

    pub fn from_bools(h: usize, w: usize, fg: impl Fn(usize, usize) -> bool) -> BinaryMask {
        let mut data = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                if fg(r, c) {
                    data[r * w + c] = 1.0;
                }
            }
        }
        BinaryMask { values: Tensor::from_vec(&[1, h, w], data).expect("consistent shape") }
    }

    /// Binarize a soft map at a threshold (strictly greater than).
    pub fn from_soft(values: &Tensor, threshold: f64) -> Result<BinaryMask> {
        let sh = values.shape();
        if sh.len() != 3 || sh[0] != 1 {
            return Err(Error::Shape(format!("expected [1,H,W] map, got {sh:?}")));
        }
        let data: Vec<f64> =
            values.data().iter().map(|&v| if v > threshold { 1.0 } else { 0.0 }).collect();
        Ok(BinaryMask { values: Tensor::from_vec(sh, data)? })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn height(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn foreground_count(&self) -> usize {
        self.values.data().iter().filter(|&&v| v == 1.0).count()
    }

    /// Intersection over union; 1.0 when both masks are empty.
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let a = self.values.data();
        let b = other.values.data();
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&x, &y) in a.iter().zip(b.iter()) {
            let (x, y) = (x == 1.0, y == 1.0);
            if x && y {
                inter += 1;
            }
            if x || y {
                union += 1;
            }
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Flow estimation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMethod {
    /// Exact analytic flow from synthetic shape states. Rejected on frames
    /// that carry no generator metadata.
    Oracle,
    /// Exhaustive integer-displacement patch search.
    BlockMatching { patch_radius: usize, search_radius: usize },
    /// All-zero field; a diagnostic baseline for ablation runs.
    Zero,
}

impl FlowMethod {
    pub fn block_matching_default() -> FlowMethod {
        FlowMethod::BlockMatching { patch_radius: 3, search_radius: 4 }
    }
}

/// Estimate the target→source displacement field between two frames.
pub fn estimate_flow(source: &Frame, target: &Frame, method: FlowMethod) -> Result<FlowField> {
    if source.height() != target.height() || source.width() != target.width() {
        return Err(Error::Shape(format!(
            "estimate_flow: frame sizes differ: {}x{} vs {}x{}",
            source.height(),
            source.width(),
            target.height(),
            target.width()
        )));
    }
    match method {
        FlowMethod::Oracle => oracle_flow(source, target),
        FlowMethod::BlockMatching { patch_radius, search_radius } => {
            Ok(block_matching_flow(source, target, patch_radius, search_radius))
        }
        FlowMethod::Zero => Ok(FlowField::zeros(target.height(), target.width())),
    }
}

/// Analytic flow for rigidly translated synthetic shapes: on the support of
/// the shape in either frame the displacement is source minus target center;
/// the static background is zero. This makes backward warping of the source
/// mask reproduce the target mask exactly.
fn oracle_flow(source: &Frame, target: &Frame) -> Result<FlowField> {
    let (Some(src_state), Some(tgt_state)) = (source.shape_state(), target.shape_state()) else {
        return Err(Error::Flow(
            "oracle flow requires synthetic frames carrying shape state".into(),
        ));
    };
    if src_state.geometry != tgt_state.geometry {
        return Err(Error::Flow("oracle flow requires a rigid shape (same geometry)".into()));
    }
    let (h, w) = (target.height(), target.width());
    let du = src_state.center.0 - tgt_state.center.0;
    let dv = src_state.center.1 - tgt_state.center.1;
    let mut data = vec![0.0; 2 * h * w];
    for r in 0..h {
        for c in 0..w {
            let (x, y) = (c as f64, r as f64);
            if tgt_state.contains(x, y) || src_state.contains(x, y) {
                data[r * w + c] = du;
                data[h * w + r * w + c] = dv;
            }
        }
    }
    FlowField::new(Tensor::from_vec(&[2, h, w], data)?)
}

/// Exhaustive integer-pixel search minimizing the sum of absolute
/// differences over a patch. Displacements are scanned in order of
/// increasing magnitude and only a strictly better score replaces the
/// incumbent, so ties resolve toward zero displacement.
fn block_matching_flow(
    source: &Frame,
    target: &Frame,
    patch_radius: usize,
    search_radius: usize,
) -> FlowField {
    let (h, w) = (target.height(), target.width());
    let src = source.pixels().data();
    let tgt = target.pixels().data();
    let hw = h * w;
    let p = patch_radius as isize;
    let s = search_radius as isize;

    // candidate displacements sorted by distance, then lexicographically
    let mut candidates: Vec<(i64, isize, isize)> = Vec::new();
    for dv in -s..=s {
        for du in -s..=s {
            candidates.push(((du * du + dv * dv) as i64, dv, du));
        }
    }
    candidates.sort();

    let clampi = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let sad = |tr: usize, tc: usize, du: isize, dv: isize| -> f64 {
        let mut acc = 0.0;
        for oy in -p..=p {
            for ox in -p..=p {
                let ty = clampi(tr as isize + oy, h);
                let tx = clampi(tc as isize + ox, w);
                let sy = clampi(tr as isize + oy + dv, h);
                let sx = clampi(tc as isize + ox + du, w);
                for ch in 0..3 {
                    acc += (tgt[ch * hw + ty * w + tx] - src[ch * hw + sy * w + sx]).abs();
                }
            }
        }
        acc
    };

    let mut data = vec![0.0; 2 * hw];
    for r in 0..h {
        for c in 0..w {
            let mut best = f64::INFINITY;
            let mut best_d = (0isize, 0isize);
            for &(_, dv, du) in &candidates {
                let score = sad(r, c, du, dv);
                if score < best {
                    best = score;
                    best_d = (du, dv);
                }
            }
            data[r * w + c] = best_d.0 as f64;
            data[hw + r * w + c] = best_d.1 as f64;
        }
    }
    FlowField { vectors: Tensor::from_vec(&[2, h, w], data).expect("consistent shape") }
}

/// Backward-warp a `[1,H,W]` map by a flow field: out(p) = in(p + flow(p)) via
/// bilinear sampling, reading 0 outside the map. Differentiable w.r.t. the
/// map; the flow is a constant.
pub fn warp_map(map: &Tensor, flow: &FlowField) -> Result<Tensor> {
    let sh = map.shape();
    if sh.len() != 3 || sh[0] != 1 {
        return Err(Error::Shape(format!("warp: map must be [1,H,W], got {sh:?}")));
    }
    if sh[1] != flow.height() || sh[2] != flow.width() {
        return Err(Error::Shape(format!(
            "warp: map {}x{} vs flow {}x{}",
            sh[1],
            sh[2],
            flow.height(),
            flow.width()
        )));
    }
    let (h, w) = (sh[1], sh[2]);
    let hw = h * w;
    let src = map.data();
    let fd = flow.vectors().data();
    let mut out = vec![0.0; hw];
    // (source index, weight) pairs per output pixel, reused by backward
    let mut taps: Vec<(usize, f64)> = Vec::new();
    let mut spans: Vec<(u32, u32)> = Vec::with_capacity(hw);
    for r in 0..h {
        for c in 0..w {
            let u = fd[r * w + c];
            let v = fd[hw + r * w + c];
            let x = c as f64 + u;
            let y = r as f64 + v;
            let start = taps.len() as u32;
            let x0 = x.floor();
            let y0 = y.floor();
            let fx = x - x0;
            let fy = y - y0;
            let mut acc = 0.0;
            for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
                for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
                    let sy = y0 as i64 + dy;
                    let sx = x0 as i64 + dx;
                    let weight = wy * wx;
                    if weight == 0.0 || sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                        continue; // zero fill outside
                    }
                    let idx = sy as usize * w + sx as usize;
                    acc += weight * src[idx];
                    taps.push((idx, weight));
                }
            }
            out[r * w + c] = acc;
            spans.push((start, taps.len() as u32));
        }
    }
    drop(src);
    drop(fd);
    Ok(Tensor::from_op(
        vec![1, h, w],
        out,
        vec![map.clone()],
        Box::new(move |args| {
            let parent = &args.parents[0];
            if !parent.requires_grad() {
                return;
            }
            let mut g = parent.grad_buf();
            for (pix, &(start, end)) in spans.iter().enumerate() {
                let og = args.out_grad[pix];
                if og == 0.0 {
                    continue;
                }
                for &(idx, weight) in &taps[start as usize..end as usize] {
                    g[idx] += og * weight;
                }
            }
        }),
    ))
}

/// Per-pixel flow magnitude after normalizing each component into `[-1,1]` by
/// the frame extent: sqrt(clamp(u/(W-1))^2 + clamp(v/(H-1))^2).
pub fn flow_magnitude(flow: &FlowField) -> Tensor {
    let (h, w) = (flow.height(), flow.width());
    let hw = h * w;
    let fd = flow.vectors().data();
    let un = if w > 1 { (w - 1) as f64 } else { 1.0 };
    let vn = if h > 1 { (h - 1) as f64 } else { 1.0 };
    let mut out = vec![0.0; hw];
    for i in 0..hw {
        let u = (fd[i] / un).clamp(-1.0, 1.0);
        let v = (fd[hw + i] / vn).clamp(-1.0, 1.0);
        out[i] = (u * u + v * v).sqrt();
    }
    Tensor::from_vec(&[1, h, w], out).expect("consistent shape")
}
