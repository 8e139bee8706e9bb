//! Saliency and segmentation evaluation: precision-recall curves, maximum
//! F-measure, S-measure, Jaccard index, and boundary contour accuracy.
//!
//! Pixels count as positive at a threshold t when the prediction is strictly
//! greater than t. PR accounting is dataset-level micro (counts pooled over
//! all frames); an empty prediction scores precision 1 by convention.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flow::BinaryMask;
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct MetricsConfig {
    /// beta^2 of the F-measure.
    pub beta_sq: f64,
    /// Mixing weight between object- and region-aware structure terms.
    pub s_alpha: f64,
    pub num_thresholds: usize,
    /// Boundary match tolerance as a fraction of the image diagonal; the
    /// pixel radius is ceil(frac * diag), never below 1.
    pub boundary_tolerance: f64,
    /// Threshold for binarizing soft ground truth.
    pub gt_binarize_threshold: f64,
    /// Report the mean of per-frame maximum F instead of the pooled-curve
    /// maximum.
    pub per_frame_f: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            beta_sq: 0.3,
            s_alpha: 0.5,
            num_thresholds: 256,
            boundary_tolerance: 0.008,
            gt_binarize_threshold: 0.5,
            per_frame_f: false,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta_sq <= 0.0 {
            return Err(Error::Config("beta_sq must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.s_alpha) {
            return Err(Error::Config("s_alpha must lie in [0,1]".into()));
        }
        if self.num_thresholds < 2 {
            return Err(Error::Config("num_thresholds must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision-recall triples at strictly increasing thresholds.
#[derive(Debug, Clone)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall\n");
        for p in &self.points {
            let _ = writeln!(s, "{:.6},{:.6},{:.6}", p.threshold, p.precision, p.recall);
        }
        s
    }
}

fn map_values<'a>(pred: &'a Tensor) -> Result<(usize, usize, std::cell::Ref<'a, Vec<f64>>)> {
    let sh = pred.shape();
    let (h, w) = match sh.len() {
        2 => (sh[0], sh[1]),
        3 if sh[0] == 1 => (sh[1], sh[2]),
        _ => {
            return Err(Error::Shape(format!(
                "expected a [H,W] or [1,H,W] map, got {sh:?}"
            )))
        }
    };
    Ok((h, w, pred.data()))
}

fn check_pair(pred: &Tensor, gt: &BinaryMask) -> Result<()> {
    let (h, w, _) = map_values(pred)?;
    if h != gt.height() || w != gt.width() {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            h,
            w,
            gt.height(),
            gt.width()
        )));
    }
    Ok(())
}

fn accumulate_counts(
    pairs: &[(&Tensor, &BinaryMask)],
    thresholds: &[f64],
) -> Result<Vec<(u64, u64, u64)>> {
    let mut counts = vec![(0u64, 0u64, 0u64); thresholds.len()]; // tp, fp, fn
    for (pred, gt) in pairs {
        check_pair(pred, gt)?;
        let (_, _, pd) = map_values(pred)?;
        let gd = gt.values().data();
        for (k, &t) in thresholds.iter().enumerate() {
            let (tp, fp, fnn) = &mut counts[k];
            for (&p, &g) in pd.iter().zip(gd.iter()) {
                let pos = p > t;
                let fg = g == 1.0;
                match (pos, fg) {
                    (true, true) => *tp += 1,
                    (true, false) => *fp += 1,
                    (false, true) => *fnn += 1,
                    _ => {}
                }
            }
        }
    }
    Ok(counts)
}

fn curve_from_counts(thresholds: &[f64], counts: &[(u64, u64, u64)]) -> PrCurve {
    let points = thresholds
        .iter()
        .zip(counts)
        .map(|(&t, &(tp, fp, fnn))| {
            let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = if tp + fnn == 0 { 1.0 } else { tp as f64 / (tp + fnn) as f64 };
            PrPoint { threshold: t, precision, recall }
        })
        .collect();
    PrCurve { points }
}

/// Micro-averaged PR curve over the evenly spaced threshold grid
/// t_k = k / (num_thresholds - 1).
pub fn pr_curve(pairs: &[(&Tensor, &BinaryMask)], cfg: &MetricsConfig) -> Result<PrCurve> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Data("pr_curve: empty prediction list".into()));
    }
    let n = cfg.num_thresholds;
    let thresholds: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let counts = accumulate_counts(pairs, &thresholds)?;
    Ok(curve_from_counts(&thresholds, &counts))
}

/// PR curve evaluated at every distinct prediction value (plus 0); exact
/// under any strictly increasing remap of the predictions.
pub fn pr_curve_dense(pairs: &[(&Tensor, &BinaryMask)]) -> Result<PrCurve> {
    if pairs.is_empty() {
        return Err(Error::Data("pr_curve: empty prediction list".into()));
    }
    let mut values: Vec<f64> = vec![0.0];
    for (pred, gt) in pairs {
        check_pair(pred, gt)?;
        values.extend(pred.data().iter().copied());
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite prediction values"));
    values.dedup();
    let counts = accumulate_counts(pairs, &values)?;
    Ok(curve_from_counts(&values, &counts))
}

/// Maximum F over the curve's (precision, recall) pairs, with F := 0 when
/// the denominator vanishes.
pub fn max_f_measure(curve: &PrCurve, cfg: &MetricsConfig) -> f64 {
    curve
        .points
        .iter()
        .map(|p| f_measure(p.precision, p.recall, cfg.beta_sq))
        .fold(0.0, f64::max)
}

pub fn f_measure(precision: f64, recall: f64, beta_sq: f64) -> f64 {
    let denom = beta_sq * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + beta_sq) * precision * recall / denom
    }
}

/// Structure measure: alpha-weighted object- and region-aware similarity
/// between a soft prediction and a binary ground truth, clamped to `[0,1]`.
pub fn s_measure(pred: &Tensor, gt: &BinaryMask, cfg: &MetricsConfig) -> Result<f64> {
    check_pair(pred, gt)?;
    let (h, w, pd) = map_values(pred)?;
    let gd = gt.values().data();
    let n = (h * w) as f64;
    let gt_mean = gd.iter().sum::<f64>() / n;
    let pred_mean = pd.iter().sum::<f64>() / n;
    let s = if gt_mean == 0.0 {
        // empty ground truth: compare the prediction against all-background
        1.0 - pred_mean
    } else if gt_mean == 1.0 {
        pred_mean
    } else {
        let so = s_object(&pd, &gd, gt_mean);
        let sr = s_region(&pd, &gd, h, w);
        cfg.s_alpha * so + (1.0 - cfg.s_alpha) * sr
    };
    Ok(s.clamp(0.0, 1.0))
}

fn dispersion(values: &[f64], mean: f64) -> f64 {
    // sample standard deviation (n-1 normalization)
    let n = values.len();
    if n <= 1 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

fn object_score(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sigma = dispersion(values, mean);
    2.0 * mean / (mean * mean + 1.0 + sigma + f64::EPSILON)
}

fn s_object(pd: &[f64], gd: &[f64], gt_mean: f64) -> f64 {
    let fg: Vec<f64> =
        pd.iter().zip(gd).filter(|(_, &g)| g == 1.0).map(|(&p, _)| p).collect();
    let bg: Vec<f64> =
        pd.iter().zip(gd).filter(|(_, &g)| g == 0.0).map(|(&p, _)| 1.0 - p).collect();
    gt_mean * object_score(&fg) + (1.0 - gt_mean) * object_score(&bg)
}

/// Ground-truth centroid (row, col) with half-up rounding; the quadrant
/// split puts the centroid row and column in the top-left block.
fn centroid(gd: &[f64], h: usize, w: usize) -> (usize, usize) {
    let mut area = 0.0;
    let (mut sy, mut sx) = (0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            if gd[r * w + c] == 1.0 {
                area += 1.0;
                sy += r as f64;
                sx += c as f64;
            }
        }
    }
    if area == 0.0 {
        return (h / 2, w / 2);
    }
    let cy = ((sy / area) + 0.5).floor() as usize;
    let cx = ((sx / area) + 0.5).floor() as usize;
    (cy.min(h - 1), cx.min(w - 1))
}

fn region_ssim(p: &[f64], g: &[f64]) -> f64 {
    let n = p.len() as f64;
    if p.is_empty() {
        return 1.0; // degenerate empty quadrant contributes weight 0 anyway
    }
    let x = p.iter().sum::<f64>() / n;
    let y = g.iter().sum::<f64>() / n;
    let denom_n = n - 1.0 + f64::EPSILON;
    let sx2 = p.iter().map(|v| (v - x) * (v - x)).sum::<f64>() / denom_n;
    let sy2 = g.iter().map(|v| (v - y) * (v - y)).sum::<f64>() / denom_n;
    let sxy = p.iter().zip(g).map(|(a, b)| (a - x) * (b - y)).sum::<f64>() / denom_n;
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx2 + sy2);
    if alpha != 0.0 {
        alpha / (beta + f64::EPSILON)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn s_region(pd: &[f64], gd: &[f64], h: usize, w: usize) -> f64 {
    let (cy, cx) = centroid(gd, h, w);
    let (rs, re) = (0, cy + 1); // top block rows [0, cy], bottom (cy, h)
    let (cs, ce) = (0, cx + 1);
    let total = (h * w) as f64;
    let mut score = 0.0;
    for (r0, r1, c0, c1) in [
        (rs, re, cs, ce),
        (rs, re, ce, w),
        (re, h, cs, ce),
        (re, h, ce, w),
    ] {
        if r0 >= r1 || c0 >= c1 {
            continue;
        }
        let mut pq = Vec::with_capacity((r1 - r0) * (c1 - c0));
        let mut gq = Vec::with_capacity((r1 - r0) * (c1 - c0));
        for r in r0..r1 {
            for c in c0..c1 {
                pq.push(pd[r * w + c]);
                gq.push(gd[r * w + c]);
            }
        }
        let weight = pq.len() as f64 / total;
        score += weight * region_ssim(&pq, &gq);
    }
    score
}

/// Intersection over union of two binary masks; 1 when both are empty.
pub fn jaccard(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::Shape(format!(
            "jaccard: {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    Ok(pred.iou(gt))
}

/// Boundary pixels under 4-connectivity; pixels on the image border with
/// foreground value are boundary (the outside counts as background).
fn boundary_pixels(mask: &BinaryMask) -> Vec<(usize, usize)> {
    let (h, w) = (mask.height(), mask.width());
    let d = mask.values().data();
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0.0
        } else {
            d[r as usize * w + c as usize]
        }
    };
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if d[r * w + c] != 1.0 {
                continue;
            }
            let (ri, ci) = (r as isize, c as isize);
            if at(ri - 1, ci) == 0.0
                || at(ri + 1, ci) == 0.0
                || at(ri, ci - 1) == 0.0
                || at(ri, ci + 1) == 0.0
            {
                out.push((r, c));
            }
        }
    }
    out
}

/// F1 over boundary-pixel correspondences within the distance tolerance.
/// Both boundaries empty scores 1; exactly one empty scores 0.
pub fn contour_accuracy(pred: &BinaryMask, gt: &BinaryMask, cfg: &MetricsConfig) -> Result<f64> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::Shape(format!(
            "contour_accuracy: {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let (h, w) = (gt.height(), gt.width());
    let diag = ((h * h + w * w) as f64).sqrt();
    let tol = (cfg.boundary_tolerance * diag).ceil().max(1.0);
    let tol_sq = tol * tol;
    let pb = boundary_pixels(pred);
    let gb = boundary_pixels(gt);
    match (pb.is_empty(), gb.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let matched = |from: &[(usize, usize)], to: &[(usize, usize)]| -> usize {
        from.iter()
            .filter(|&&(r, c)| {
                to.iter().any(|&(tr, tc)| {
                    let dr = r as f64 - tr as f64;
                    let dc = c as f64 - tc as f64;
                    dr * dr + dc * dc <= tol_sq
                })
            })
            .count()
    };
    let precision = matched(&pb, &gb) as f64 / pb.len() as f64;
    let recall = matched(&gb, &pb) as f64 / gb.len() as f64;
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

/// Scores of one group of frames (a video, or everything pooled).
#[derive(Debug, Clone, Copy)]
pub struct GroupScores {
    pub max_f: f64,
    pub s: f64,
    pub jaccard: f64,
    pub boundary_f: f64,
}

/// Evaluation report: per-video scores plus the pooled scores, rendered as
/// `key: value` lines.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub per_video: BTreeMap<String, GroupScores>,
    pub pooled: GroupScores,
}

impl MetricReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, g) in &self.per_video {
            let _ = writeln!(s, "video.{name}.maxF: {:.6}", g.max_f);
            let _ = writeln!(s, "video.{name}.S: {:.6}", g.s);
            let _ = writeln!(s, "video.{name}.J: {:.6}", g.jaccard);
            let _ = writeln!(s, "video.{name}.boundaryF: {:.6}", g.boundary_f);
        }
        let _ = writeln!(s, "pooled.maxF: {:.6}", self.pooled.max_f);
        let _ = writeln!(s, "pooled.S: {:.6}", self.pooled.s);
        let _ = writeln!(s, "pooled.J: {:.6}", self.pooled.jaccard);
        let _ = writeln!(s, "pooled.boundaryF: {:.6}", self.pooled.boundary_f);
        s
    }
}

/// Score a set of videos. Predictions are soft maps; J and boundary-F
/// binarize them at 0.5. The pooled maxF comes from the pooled curve (or the
/// mean of per-frame maxima when `per_frame_f` is set); S, J, and boundary-F
/// pool as per-frame means.
pub fn evaluate_videos(
    videos: &[(String, Vec<(Tensor, BinaryMask)>)],
    cfg: &MetricsConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    if videos.is_empty() || videos.iter().all(|(_, v)| v.is_empty()) {
        return Err(Error::Data("evaluate_videos: nothing to score".into()));
    }
    let mut per_video = BTreeMap::new();
    let mut all_pairs: Vec<(&Tensor, &BinaryMask)> = Vec::new();
    let mut pooled_s = 0.0;
    let mut pooled_j = 0.0;
    let mut pooled_bf = 0.0;
    let mut pooled_frames = 0usize;
    let mut per_frame_max_f = Vec::new();
    for (name, frames) in videos {
        if frames.is_empty() {
            continue;
        }
        let pairs: Vec<(&Tensor, &BinaryMask)> =
            frames.iter().map(|(p, g)| (p, g)).collect();
        let curve = pr_curve(&pairs, cfg)?;
        let mut s_sum = 0.0;
        let mut j_sum = 0.0;
        let mut bf_sum = 0.0;
        let mut f_frames = Vec::new();
        for (pred, gt) in frames {
            s_sum += s_measure(pred, gt, cfg)?;
            let pm = BinaryMask::from_soft(&to_3d(pred)?, 0.5)?;
            j_sum += jaccard(&pm, gt)?;
            bf_sum += contour_accuracy(&pm, gt, cfg)?;
            let frame_curve = pr_curve(&[(pred, gt)], cfg)?;
            f_frames.push(max_f_measure(&frame_curve, cfg));
        }
        let nf = frames.len() as f64;
        let video_max_f = if cfg.per_frame_f {
            f_frames.iter().sum::<f64>() / nf
        } else {
            max_f_measure(&curve, cfg)
        };
        per_video.insert(
            name.clone(),
            GroupScores {
                max_f: video_max_f,
                s: s_sum / nf,
                jaccard: j_sum / nf,
                boundary_f: bf_sum / nf,
            },
        );
        pooled_s += s_sum;
        pooled_j += j_sum;
        pooled_bf += bf_sum;
        pooled_frames += frames.len();
        per_frame_max_f.extend(f_frames);
        all_pairs.extend(frames.iter().map(|(p, g)| (p, g)));
    }
    let pooled_curve = pr_curve(&all_pairs, cfg)?;
    let pooled_max_f = if cfg.per_frame_f {
        per_frame_max_f.iter().sum::<f64>() / per_frame_max_f.len() as f64
    } else {
        max_f_measure(&pooled_curve, cfg)
    };
    let nf = pooled_frames as f64;
    Ok(MetricReport {
        per_video,
        pooled: GroupScores {
            max_f: pooled_max_f,
            s: pooled_s / nf,
            jaccard: pooled_j / nf,
            boundary_f: pooled_bf / nf,
        },
    })
}

fn to_3d(pred: &Tensor) -> Result<Tensor> {
    let sh = pred.shape();
    match sh.len() {
        3 => Ok(pred.clone()),
        2 => Tensor::from_vec(&[1, sh[0], sh[1]], pred.to_vec()),
        _ => Err(Error::Shape(format!("expected a map, got {sh:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(h: usize, w: usize, vals: Vec<f64>) -> Tensor {
        Tensor::from_vec(&[1, h, w], vals).unwrap()
    }

    fn mask(h: usize, w: usize, fg: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_bools(h, w, |r, c| fg.contains(&(r, c)))
    }

    #[test]
    fn perfect_prediction_has_unit_precision_and_recall() {
        let gt = mask(3, 3, &[(0, 0), (1, 1)]);
        let pred = map(3, 3, gt.values().to_vec());
        let curve = pr_curve(&[(&pred, &gt)], &MetricsConfig::default()).unwrap();
        for p in &curve.points {
            if p.threshold > 0.0 && p.threshold < 1.0 {
                assert_eq!((p.precision, p.recall), (1.0, 1.0), "at t={}", p.threshold);
            }
        }
        assert_eq!(max_f_measure(&curve, &MetricsConfig::default()), 1.0);
    }

    #[test]
    fn worked_two_by_two_example() {
        let gt = mask(2, 2, &[(0, 0)]);
        let pred = map(2, 2, vec![0.9, 0.1, 0.1, 0.1]);
        let cfg = MetricsConfig::default();
        let curve = pr_curve(&[(&pred, &gt)], &cfg).unwrap();
        let at = |t: f64| {
            curve
                .points
                .iter()
                .min_by(|a, b| {
                    (a.threshold - t).abs().partial_cmp(&(b.threshold - t).abs()).unwrap()
                })
                .copied()
                .unwrap()
        };
        let p05 = at(0.5);
        assert_eq!((p05.precision, p05.recall), (1.0, 1.0));
        let p005 = at(0.05);
        assert_eq!((p005.precision, p005.recall), (0.25, 1.0));
    }

    #[test]
    fn empty_prediction_convention() {
        let gt = mask(2, 2, &[(0, 1)]);
        let pred = map(2, 2, vec![0.0; 4]);
        let curve = pr_curve(&[(&pred, &gt)], &MetricsConfig::default()).unwrap();
        for p in &curve.points {
            if p.threshold > 0.0 {
                assert_eq!(p.recall, 0.0);
                assert_eq!(p.precision, 1.0);
            }
        }
    }

    #[test]
    fn rejects_empty_list() {
        assert!(matches!(
            pr_curve(&[], &MetricsConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn max_f_worked_values() {
        let cfg = MetricsConfig::default();
        // single pair P=0.8, R=0.5 -> 1.3*0.4/0.74
        let f = f_measure(0.8, 0.5, cfg.beta_sq);
        assert!((f - 1.3 * 0.4 / 0.74).abs() < 1e-15);
        assert!((f - 0.70270).abs() < 5e-6);
        // pairs {(1.0, 0.1), (0.5, 0.5)} -> max F = 0.5
        let curve = PrCurve {
            points: vec![
                PrPoint { threshold: 0.2, precision: 1.0, recall: 0.1 },
                PrPoint { threshold: 0.7, precision: 0.5, recall: 0.5 },
            ],
        };
        let f1 = f_measure(1.0, 0.1, cfg.beta_sq);
        assert!((f1 - 0.325).abs() < 1e-12);
        assert!((max_f_measure(&curve, &cfg) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn f_measure_zero_denominator() {
        assert_eq!(f_measure(0.0, 0.0, 0.3), 0.0);
    }

    #[test]
    fn s_measure_self_similarity_is_one() {
        let gt = mask(4, 4, &[(1, 1), (1, 2), (2, 1), (2, 2)]);
        let pred = map(4, 4, gt.values().to_vec());
        let s = s_measure(&pred, &gt, &MetricsConfig::default()).unwrap();
        assert!((s - 1.0).abs() < 1e-12, "s = {s}");
    }

    #[test]
    fn s_measure_empty_empty_is_one() {
        let gt = mask(4, 4, &[]);
        let pred = map(4, 4, vec![0.0; 16]);
        let s = s_measure(&pred, &gt, &MetricsConfig::default()).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn s_measure_empty_gt_compares_against_zero() {
        let gt = mask(4, 4, &[]);
        let pred = map(4, 4, vec![0.25; 16]);
        let s = s_measure(&pred, &gt, &MetricsConfig::default()).unwrap();
        assert!((s - 0.75).abs() < 1e-12);
    }

    #[test]
    fn jaccard_reference_cases() {
        let a = mask(2, 2, &[(0, 0), (0, 1)]);
        let b = mask(2, 2, &[(0, 1), (1, 1)]);
        assert!((jaccard(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        let c = mask(2, 2, &[(1, 0)]);
        assert_eq!(jaccard(&a, &c).unwrap(), 0.0);
        let e = mask(2, 2, &[]);
        assert_eq!(jaccard(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn contour_identity_and_total_mismatch() {
        let cfg = MetricsConfig::default();
        let a = mask(16, 16, &[(4, 4), (4, 5), (5, 4), (5, 5)]);
        assert_eq!(contour_accuracy(&a, &a, &cfg).unwrap(), 1.0);
        let far = mask(16, 16, &[(12, 12)]);
        assert_eq!(contour_accuracy(&a, &far, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn one_pixel_dilation_within_tolerance() {
        // GT square [5,10)x[5,10); prediction dilated by one pixel.
        // tolerance on 16x16 is ceil(0.008 * 22.6) = 1
        let cfg = MetricsConfig::default();
        let square = |r: usize, c: usize| (5..10).contains(&r) && (5..10).contains(&c);
        let gt = BinaryMask::from_bools(16, 16, square);
        // 4-connected dilation: every added pixel is 1 px from the square
        let pred = BinaryMask::from_bools(16, 16, |r, c| {
            square(r, c)
                || (r > 0 && square(r - 1, c))
                || square(r + 1, c)
                || (c > 0 && square(r, c - 1))
                || square(r, c + 1)
        });
        let f = contour_accuracy(&pred, &gt, &cfg).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn recall_is_non_increasing_in_threshold() {
        let mut rng = crate::rng::Rng::new(31);
        for _ in 0..10 {
            let vals: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
            let pred = map(8, 8, vals);
            let gt = BinaryMask::from_bools(8, 8, |r, c| (r + c) % 3 == 0);
            let curve = pr_curve(&[(&pred, &gt)], &MetricsConfig::default()).unwrap();
            for pair in curve.points.windows(2) {
                assert!(pair[1].recall <= pair[0].recall + 1e-15);
            }
        }
    }

    #[test]
    fn dense_mode_max_f_is_invariant_under_monotone_remap() {
        let mut rng = crate::rng::Rng::new(37);
        for _ in 0..10 {
            let vals: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
            let remapped: Vec<f64> = vals.iter().map(|v| (v * 2.5).tanh() * 0.5 + 0.5).collect();
            let gt = BinaryMask::from_bools(8, 8, |r, c| (r * 8 + c) % 4 == 1);
            let cfg = MetricsConfig::default();
            let a = map(8, 8, vals);
            let b = map(8, 8, remapped);
            let fa = max_f_measure(&pr_curve_dense(&[(&a, &gt)]).unwrap(), &cfg);
            let fb = max_f_measure(&pr_curve_dense(&[(&b, &gt)]).unwrap(), &cfg);
            assert!((fa - fb).abs() < 1e-12, "{fa} vs {fb}");
        }
    }

    #[test]
    fn report_text_layout() {
        let gt = mask(4, 4, &[(1, 1)]);
        let pred = map(4, 4, gt.values().to_vec());
        let report = evaluate_videos(
            &[("a".to_string(), vec![(pred, gt)])],
            &MetricsConfig::default(),
        )
        .unwrap();
        let text = report.to_text();
        assert!(text.contains("video.a.maxF: 1.000000"), "{text}");
        assert!(text.contains("pooled.J: 1.000000"), "{text}");
        assert!(text.contains("pooled.S: 1.000000"), "{text}");
        assert!(text.contains("pooled.boundaryF: 1.000000"), "{text}");
    }

    #[test]
    fn per_frame_flag_switches_max_f_aggregation() {
        // each frame is separable alone, but their value scales disagree, so
        // no single pooled threshold is perfect
        let gt1 = mask(2, 2, &[(0, 0)]);
        let pred1 = map(2, 2, vec![0.3, 0.2, 0.2, 0.2]);
        let gt2 = mask(2, 2, &[(1, 1)]);
        let pred2 = map(2, 2, vec![0.4, 0.4, 0.4, 0.9]);
        let pooled_cfg = MetricsConfig::default();
        let per_frame_cfg = MetricsConfig { per_frame_f: true, ..MetricsConfig::default() };
        let videos = vec![("v".to_string(), vec![(pred1, gt1), (pred2, gt2)])];
        let pooled = evaluate_videos(&videos, &pooled_cfg).unwrap().pooled.max_f;
        let per_frame = evaluate_videos(&videos, &per_frame_cfg).unwrap().pooled.max_f;
        assert_eq!(per_frame, 1.0);
        assert!(pooled < 0.9, "pooled maxF {pooled}");
    }

    #[test]
    fn csv_header_and_row_count() {
        let gt = mask(2, 2, &[(0, 0)]);
        let pred = map(2, 2, vec![0.9, 0.1, 0.2, 0.3]);
        let curve = pr_curve(&[(&pred, &gt)], &MetricsConfig::default()).unwrap();
        let csv = curve.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "threshold,precision,recall");
        assert_eq!(lines.count(), 256);
    }
}
