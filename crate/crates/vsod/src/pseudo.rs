//! Flow-guided pseudo-label generation from sparse annotations.
//!
//! A triplet of frames (i, k, j) with ground truth at i and j yields an
//! estimated label for k: both ground truths are warped to k along estimated
//! flow, flow magnitudes are attached, and a 7-channel variant of the
//! spatial network refines the stack into a soft pseudo-label.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flow::{estimate_flow, flow_magnitude, warp_map, BinaryMask, FlowMethod};
use crate::nn::ops;
use crate::nn::params::ParamRegistry;
use crate::nn::tensor::Tensor;
use crate::rng::Rng;
use crate::spatial::{Frame, SaliencyMap, SpatialConfig, SpatialNet};

/// Sparse-annotation plan: one ground truth every `interval` frames plus
/// `per_interval` generated labels inside each interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnotationSchedule {
    pub interval: usize,
    pub per_interval: usize,
}

impl AnnotationSchedule {
    pub fn new(interval: usize, per_interval: usize) -> Result<AnnotationSchedule> {
        let s = AnnotationSchedule { interval, per_interval };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(Error::Schedule("interval must be >= 1".into()));
        }
        if self.per_interval + 1 > self.interval {
            return Err(Error::Schedule(format!(
                "per-interval pseudo-label count {} must be <= interval - 1 = {}",
                self.per_interval,
                self.interval - 1
            )));
        }
        Ok(())
    }
}

/// Role of one frame in a training plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameLabel {
    Gt,
    Pseudo,
    Unlabeled,
}

impl FrameLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameLabel::Gt => "gt",
            FrameLabel::Pseudo => "pseudo",
            FrameLabel::Unlabeled => "unlabeled",
        }
    }

    pub fn parse(s: &str) -> Result<FrameLabel> {
        match s {
            "gt" => Ok(FrameLabel::Gt),
            "pseudo" => Ok(FrameLabel::Pseudo),
            "unlabeled" => Ok(FrameLabel::Unlabeled),
            other => Err(Error::Data(format!("unknown frame label kind: {other}"))),
        }
    }
}

/// Round half-down: offsets at exact midpoints land on the earlier frame.
fn round_offset(num: usize, den: usize) -> usize {
    let q = num / den;
    let r = num % den;
    if 2 * r > den {
        q + 1
    } else {
        q
    }
}

/// Lay out ground-truth and pseudo-label positions over a sequence.
/// Ground truth sits at multiples of the interval; each anchor contributes
/// `per_interval` pseudo positions at the evenly spaced interior offsets
/// round(t*l/(m+1)), clipped to the sequence.
pub fn build_pseudo_schedule(
    num_frames: usize,
    schedule: &AnnotationSchedule,
) -> Result<Vec<FrameLabel>> {
    schedule.validate()?;
    if num_frames == 0 {
        return Err(Error::Schedule("empty sequence".into()));
    }
    let l = schedule.interval;
    let m = schedule.per_interval;
    let mut plan = vec![FrameLabel::Unlabeled; num_frames];
    let mut anchor = 0;
    while anchor < num_frames {
        plan[anchor] = FrameLabel::Gt;
        for t in 1..=m {
            let p = anchor + round_offset(t * l, m + 1);
            if p < num_frames && plan[p] == FrameLabel::Unlabeled {
                plan[p] = FrameLabel::Pseudo;
            }
        }
        anchor += l;
    }
    Ok(plan)
}

/// Ground-truth indices of a plan.
pub fn gt_indices(plan: &[FrameLabel]) -> Vec<usize> {
    plan.iter()
        .enumerate()
        .filter(|(_, l)| **l == FrameLabel::Gt)
        .map(|(i, _)| i)
        .collect()
}

/// Pseudo-label indices of a plan.
pub fn pseudo_indices(plan: &[FrameLabel]) -> Vec<usize> {
    plan.iter()
        .enumerate()
        .filter(|(_, l)| **l == FrameLabel::Pseudo)
        .map(|(i, _)| i)
        .collect()
}

/// Training triplets over annotated indices spaced exactly `l` apart:
/// (k-l, k, k+l) for every annotated center with both neighbors annotated.
/// The same construction drives generator training and generation.
pub fn sample_triplets(annotated: &[usize], l: usize) -> Result<Vec<(usize, usize, usize)>> {
    if l == 0 {
        return Err(Error::Schedule("interval must be >= 1".into()));
    }
    for pair in annotated.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Schedule(format!(
                "annotated indices must be strictly increasing at {}",
                pair[1]
            )));
        }
        if pair[1] - pair[0] != l {
            return Err(Error::Schedule(format!(
                "annotated index {} breaks the fixed spacing {l} (previous {})",
                pair[1], pair[0]
            )));
        }
    }
    if annotated.len() < 3 {
        return Ok(Vec::new());
    }
    Ok(annotated.windows(3).map(|w| (w[0], w[1], w[2])).collect())
}

/// The 7-channel generator input: RGB, two warped ground truths, two flow
/// magnitudes, in this order.
pub struct AssembledInput {
    channels: Tensor,
}

impl AssembledInput {
    pub fn tensor(&self) -> &Tensor {
        &self.channels
    }
}

/// Stack the generator input channels. All maps must share the frame's
/// spatial size; warped masks stay in `[0,1]` and magnitudes are nonnegative.
pub fn assemble_input(
    frame: &Frame,
    warped_i: &Tensor,
    warped_j: &Tensor,
    mag_i: &Tensor,
    mag_j: &Tensor,
) -> Result<AssembledInput> {
    let (h, w) = (frame.height(), frame.width());
    for (name, t) in [
        ("warped ground truth i", warped_i),
        ("warped ground truth j", warped_j),
        ("flow magnitude i", mag_i),
        ("flow magnitude j", mag_j),
    ] {
        let sh = t.shape();
        if sh != [1, h, w] {
            return Err(Error::Shape(format!(
                "{name}: expected [1,{h},{w}], got {sh:?}"
            )));
        }
    }
    for (name, t, lo, hi) in [
        ("warped ground truth i", warped_i, 0.0, 1.0),
        ("warped ground truth j", warped_j, 0.0, 1.0),
        ("flow magnitude i", mag_i, 0.0, f64::INFINITY),
        ("flow magnitude j", mag_j, 0.0, f64::INFINITY),
    ] {
        if let Some(bad) = t.data().iter().find(|v| !(lo..=hi).contains(*v)) {
            return Err(Error::Data(format!("{name}: value {bad} out of range")));
        }
    }
    let channels =
        ops::concat_channels(&[frame.pixels(), warped_i, warped_j, mag_i, mag_j])?;
    Ok(AssembledInput { channels })
}

/// Frame triplet for generation. The standard form has the target strictly
/// between the two annotated frames; at a sequence tail, where no later
/// annotation exists, the target may follow both (built with
/// [`Triplet::tail`]).
#[derive(Debug, Clone, Copy)]
pub struct Triplet {
    pub i: usize,
    pub k: usize,
    pub j: usize,
}

impl Triplet {
    pub fn new(i: usize, k: usize, j: usize) -> Result<Triplet> {
        if !(i < k && k < j) {
            return Err(Error::Schedule(format!(
                "triplet ordering violated: need i < k < j, got ({i}, {k}, {j})"
            )));
        }
        Ok(Triplet { i, k, j })
    }

    /// Boundary form: both annotations precede the target.
    pub fn tail(i: usize, j: usize, k: usize) -> Result<Triplet> {
        if !(i < j && j < k) {
            return Err(Error::Schedule(format!(
                "tail triplet needs i < j < k, got ({i}, {j}, {k})"
            )));
        }
        Ok(Triplet { i, k, j })
    }
}

/// The modified spatial network consuming 7-channel inputs.
pub struct PseudoLabelGenerator {
    pub net: SpatialNet,
}

impl PseudoLabelGenerator {
    /// Configuration of the generator's network: the given spatial config
    /// with a 7-channel stem.
    pub fn config(base: &SpatialConfig) -> SpatialConfig {
        SpatialConfig { in_channels: 7, ..base.clone() }
    }

    /// Fresh generator with randomly initialized weights.
    pub fn new(base: &SpatialConfig, reg: &mut ParamRegistry, rng: &mut Rng) -> Result<Self> {
        let net = SpatialNet::new(&Self::config(base), reg, rng)?;
        Ok(PseudoLabelGenerator { net })
    }

    /// Generator warm-started from an image-pretrained spatial network: every
    /// weight is copied; the stem kernel's RGB slots take the pretrained
    /// values and the four new input slots start at zero, so at
    /// initialization the generator reproduces the pretrained network on the
    /// RGB channels exactly.
    pub fn from_pretrained(
        base: &SpatialConfig,
        pretrained: &BTreeMap<String, (Vec<usize>, Vec<f64>)>,
        reg: &mut ParamRegistry,
        rng: &mut Rng,
    ) -> Result<Self> {
        let gen = Self::new(base, reg, rng)?;
        const STEM: &str = "backbone.stage0.entry.weight";
        for (name, tensor) in reg.iter() {
            let Some((shape, values)) = pretrained.get(name) else {
                return Err(Error::Checkpoint(format!(
                    "pretrained weights missing parameter {name}"
                )));
            };
            if name == STEM {
                let gsh = tensor.shape().to_vec();
                if shape.len() != 4 || gsh.len() != 4 || shape[0] != gsh[0] || shape[1] != 3
                    || gsh[1] != 7 || shape[2..] != gsh[2..]
                {
                    return Err(Error::Checkpoint(format!(
                        "stem kernel shapes incompatible: pretrained {shape:?} vs generator {gsh:?}"
                    )));
                }
                let (oc, khw) = (gsh[0], gsh[2] * gsh[3]);
                let mut data = tensor.data_mut();
                data.fill(0.0);
                for o in 0..oc {
                    for c in 0..3 {
                        for t in 0..khw {
                            data[(o * 7 + c) * khw + t] = values[(o * 3 + c) * khw + t];
                        }
                    }
                }
            } else {
                if tensor.shape() != shape.as_slice() {
                    return Err(Error::Checkpoint(format!(
                        "parameter {name}: pretrained shape {shape:?} vs generator {:?}",
                        tensor.shape()
                    )));
                }
                tensor.data_mut().copy_from_slice(values);
            }
        }
        Ok(gen)
    }

    /// Forward pass on an assembled input.
    pub fn forward(&self, input: &AssembledInput) -> Result<SaliencyMap> {
        let sh = input.tensor().shape().to_vec();
        let feats = self.net.extract_features(input.tensor())?;
        self.net.segment(&feats, sh[1], sh[2])
    }

    /// Build the 7-channel input for a triplet and run the network.
    /// Ground truth must be present exactly at the two annotated indices.
    #[allow(clippy::too_many_arguments)]
    pub fn generate(
        &self,
        triplet: &Triplet,
        frame_i: &Frame,
        gt_i: &BinaryMask,
        frame_k: &Frame,
        frame_j: &Frame,
        gt_j: &BinaryMask,
        method: FlowMethod,
    ) -> Result<SaliencyMap> {
        let flow_ki = estimate_flow(frame_i, frame_k, method)?;
        let flow_kj = estimate_flow(frame_j, frame_k, method)?;
        let warped_i = warp_map(gt_i.values(), &flow_ki)?;
        let warped_j = warp_map(gt_j.values(), &flow_kj)?;
        let mag_i = flow_magnitude(&flow_ki);
        let mag_j = flow_magnitude(&flow_kj);
        let _ = triplet; // indices are the caller's bookkeeping; shapes are checked here
        let input = assemble_input(frame_k, &warped_i, &warped_j, &mag_i, &mag_j)?;
        self.forward(&input)
    }
}
