//! Independent brute-force oracles shared by the integration suites.
//!
//! Everything here is written straight from the definitions with plain
//! nested loops and no reuse of the crate's numeric paths, so agreement is
//! evidence rather than tautology.

#![allow(dead_code)]

use vsod::nn::Tensor;
use vsod::rng::Rng;

pub fn rand_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(lo, hi)).collect()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ── convolution ─────────────────────────────────────────────────────

/// Plain cross-correlation with zero padding.
#[allow(clippy::too_many_arguments)]
pub fn brute_conv2d(
    x: &[f64],
    k: &[f64],
    bias: Option<&[f64]>,
    in_c: usize,
    h: usize,
    w: usize,
    out_c: usize,
    ksize: usize,
    stride: usize,
    dil: usize,
    pad: usize,
) -> Vec<f64> {
    let span = dil * (ksize - 1) + 1;
    let oh = (h + 2 * pad - span) / stride + 1;
    let ow = (w + 2 * pad - span) / stride + 1;
    let mut out = vec![0.0; out_c * oh * ow];
    for oc in 0..out_c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = match bias {
                    Some(b) => b[oc],
                    None => 0.0,
                };
                for ic in 0..in_c {
                    for ky in 0..ksize {
                        for kx in 0..ksize {
                            let iy = (oy * stride + ky * dil) as isize - pad as isize;
                            let ix = (ox * stride + kx * dil) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            acc += x[(ic * h + iy as usize) * w + ix as usize]
                                * k[((oc * in_c + ic) * ksize + ky) * ksize + kx];
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    out
}

/// 3x3 same-padded stride-1 convolution, the shape every recurrent kernel
/// uses.
pub fn brute_conv3x3_same(x: &[f64], k: &[f64], c_in: usize, c_out: usize, h: usize, w: usize) -> Vec<f64> {
    brute_conv2d(x, k, None, c_in, h, w, c_out, 3, 1, 1, 1)
}

// ── warping ─────────────────────────────────────────────────────────

/// Bilinear read with zero fill outside the map.
pub fn brute_bilinear_sample(map: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let mut acc = 0.0;
    for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            let sy = y0 + dy;
            let sx = x0 + dx;
            let weight = wy * wx;
            if weight == 0.0 || sy < 0.0 || sx < 0.0 || sy >= h as f64 || sx >= w as f64 {
                continue;
            }
            acc += weight * map[sy as usize * w + sx as usize];
        }
    }
    acc
}

/// Backward warp: out(p) = sample(map, p + flow(p)).
pub fn brute_warp(map: &[f64], flow_u: &[f64], flow_v: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let x = c as f64 + flow_u[r * w + c];
            let y = r as f64 + flow_v[r * w + c];
            out[r * w + c] = brute_bilinear_sample(map, h, w, y, x);
        }
    }
    out
}

// ── recurrence ──────────────────────────────────────────────────────

pub struct BruteGruWeights {
    pub w_xz: Vec<f64>,
    pub w_hz: Vec<f64>,
    pub w_xr: Vec<f64>,
    pub w_hr: Vec<f64>,
    pub w_xh: Vec<f64>,
    pub w_hh: Vec<f64>,
}

/// Straight-line transcription of the gated update:
/// Z = σ(Wxz*x + Whz*h), R = σ(Wxr*x + Whr*h),
/// H' = tanh(Wxh*x + R∘(Whh*h)), out = (1-Z)∘H' + Z∘h.
pub fn brute_gru_cell(
    x: &[f64],
    h_prev: &[f64],
    ww: &BruteGruWeights,
    c: usize,
    h: usize,
    w: usize,
) -> Vec<f64> {
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let az = brute_conv3x3_same(x, &ww.w_xz, c, c, h, w);
    let bz = brute_conv3x3_same(h_prev, &ww.w_hz, c, c, h, w);
    let ar = brute_conv3x3_same(x, &ww.w_xr, c, c, h, w);
    let br = brute_conv3x3_same(h_prev, &ww.w_hr, c, c, h, w);
    let ah = brute_conv3x3_same(x, &ww.w_xh, c, c, h, w);
    let bh = brute_conv3x3_same(h_prev, &ww.w_hh, c, c, h, w);
    let mut out = vec![0.0; c * h * w];
    for i in 0..out.len() {
        let z = sig(az[i] + bz[i]);
        let r = sig(ar[i] + br[i]);
        let cand = (ah[i] + r * bh[i]).tanh();
        out[i] = (1.0 - z) * cand + z * h_prev[i];
    }
    out
}

// ── metrics ─────────────────────────────────────────────────────────

/// Pooled precision/recall at one threshold (positive means strictly
/// greater); empty predictions score precision 1.
pub fn brute_pr_at(preds: &[(&[f64], &[f64])], t: f64) -> (f64, f64) {
    let (mut tp, mut fp, mut fnn) = (0u64, 0u64, 0u64);
    for (pred, gt) in preds {
        for i in 0..pred.len() {
            let pos = pred[i] > t;
            let fg = gt[i] == 1.0;
            if pos && fg {
                tp += 1;
            } else if pos && !fg {
                fp += 1;
            } else if !pos && fg {
                fnn += 1;
            }
        }
    }
    let p = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fnn == 0 { 1.0 } else { tp as f64 / (tp + fnn) as f64 };
    (p, r)
}

/// Maximum F-measure over an evenly spaced threshold grid.
pub fn brute_max_f(preds: &[(&[f64], &[f64])], beta_sq: f64, num_thresholds: usize) -> f64 {
    let mut best = 0.0f64;
    for k in 0..num_thresholds {
        let t = k as f64 / (num_thresholds - 1) as f64;
        let (p, r) = brute_pr_at(preds, t);
        let denom = beta_sq * p + r;
        let f = if denom == 0.0 { 0.0 } else { (1.0 + beta_sq) * p * r / denom };
        best = best.max(f);
    }
    best
}

pub fn brute_jaccard(pred: &[f64], gt: &[f64]) -> f64 {
    let mut inter = 0u64;
    let mut union = 0u64;
    for i in 0..pred.len() {
        let a = pred[i] == 1.0;
        let b = gt[i] == 1.0;
        if a && b {
            inter += 1;
        }
        if a || b {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Independent transcription of the structure measure: alpha-blend of the
/// object-aware term (foreground/background means and sample dispersions)
/// and the region-aware term (custom SSIM over the four centroid quadrants,
/// area-weighted), with the empty / full ground-truth special cases.
pub fn brute_s_measure(pred: &[f64], gt: &[f64], h: usize, w: usize, alpha: f64) -> f64 {
    let n = (h * w) as f64;
    let eps = f64::EPSILON;
    let gt_mean: f64 = gt.iter().sum::<f64>() / n;
    if gt_mean == 0.0 {
        let x: f64 = pred.iter().sum::<f64>() / n;
        return (1.0 - x).clamp(0.0, 1.0);
    }
    if gt_mean == 1.0 {
        let x: f64 = pred.iter().sum::<f64>() / n;
        return x.clamp(0.0, 1.0);
    }

    // object term
    let object = |vals: &[f64]| -> f64 {
        if vals.is_empty() {
            return 0.0;
        }
        let m: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = if vals.len() <= 1 {
            0.0
        } else {
            (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() as f64 - 1.0))
                .sqrt()
        };
        2.0 * m / (m * m + 1.0 + sd + eps)
    };
    let mut fg_vals = Vec::new();
    let mut bg_vals = Vec::new();
    for i in 0..pred.len() {
        if gt[i] == 1.0 {
            fg_vals.push(pred[i]);
        } else {
            bg_vals.push(1.0 - pred[i]);
        }
    }
    let s_object = gt_mean * object(&fg_vals) + (1.0 - gt_mean) * object(&bg_vals);

    // region term
    let mut area = 0.0;
    let (mut sy, mut sx) = (0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            if gt[r * w + c] == 1.0 {
                area += 1.0;
                sy += r as f64;
                sx += c as f64;
            }
        }
    }
    let cy = (((sy / area) + 0.5).floor() as usize).min(h - 1);
    let cx = (((sx / area) + 0.5).floor() as usize).min(w - 1);

    let ssim = |p: &[f64], g: &[f64]| -> f64 {
        let m = p.len() as f64;
        let x: f64 = p.iter().sum::<f64>() / m;
        let y: f64 = g.iter().sum::<f64>() / m;
        let dn = m - 1.0 + eps;
        let sx2: f64 = p.iter().map(|v| (v - x) * (v - x)).sum::<f64>() / dn;
        let sy2: f64 = g.iter().map(|v| (v - y) * (v - y)).sum::<f64>() / dn;
        let sxy: f64 = p.iter().zip(g).map(|(a, b)| (a - x) * (b - y)).sum::<f64>() / dn;
        let alpha_term = 4.0 * x * y * sxy;
        let beta_term = (x * x + y * y) * (sx2 + sy2);
        if alpha_term != 0.0 {
            alpha_term / (beta_term + eps)
        } else if beta_term == 0.0 {
            1.0
        } else {
            0.0
        }
    };
    let mut s_region = 0.0;
    for (r0, r1, c0, c1) in [
        (0, cy + 1, 0, cx + 1),
        (0, cy + 1, cx + 1, w),
        (cy + 1, h, 0, cx + 1),
        (cy + 1, h, cx + 1, w),
    ] {
        if r0 >= r1 || c0 >= c1 {
            continue;
        }
        let mut pq = Vec::new();
        let mut gq = Vec::new();
        for r in r0..r1 {
            for c in c0..c1 {
                pq.push(pred[r * w + c]);
                gq.push(gt[r * w + c]);
            }
        }
        s_region += (pq.len() as f64 / n) * ssim(&pq, &gq);
    }

    (alpha * s_object + (1.0 - alpha) * s_region).clamp(0.0, 1.0)
}

/// Boundary F1 with 4-connectivity boundaries (image border counts as
/// background) and Euclidean tolerance ceil(0.008 * diagonal), at least 1.
pub fn brute_boundary_f(pred: &[f64], gt: &[f64], h: usize, w: usize, tol_frac: f64) -> f64 {
    let boundary = |mask: &[f64]| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..h {
            for c in 0..w {
                if mask[r * w + c] != 1.0 {
                    continue;
                }
                let mut edge = r == 0 || r == h - 1 || c == 0 || c == w - 1;
                if !edge {
                    edge = mask[(r - 1) * w + c] == 0.0
                        || mask[(r + 1) * w + c] == 0.0
                        || mask[r * w + c - 1] == 0.0
                        || mask[r * w + c + 1] == 0.0;
                }
                if edge {
                    out.push((r, c));
                }
            }
        }
        out
    };
    let pb = boundary(pred);
    let gb = boundary(gt);
    if pb.is_empty() && gb.is_empty() {
        return 1.0;
    }
    if pb.is_empty() || gb.is_empty() {
        return 0.0;
    }
    let tol = (tol_frac * ((h * h + w * w) as f64).sqrt()).ceil().max(1.0);
    let close = |a: (usize, usize), b: (usize, usize)| {
        let dr = a.0 as f64 - b.0 as f64;
        let dc = a.1 as f64 - b.1 as f64;
        (dr * dr + dc * dc).sqrt() <= tol
    };
    let matched_p = pb.iter().filter(|p| gb.iter().any(|g| close(**p, *g))).count();
    let matched_g = gb.iter().filter(|g| pb.iter().any(|p| close(*p, **g))).count();
    let precision = matched_p as f64 / pb.len() as f64;
    let recall = matched_g as f64 / gb.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Random binary mask with roughly the given foreground rate.
pub fn rand_mask_values(h: usize, w: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    (0..h * w).map(|_| if rng.next_f64() < rate { 1.0 } else { 0.0 }).collect()
}
