//! Three-stage training pipeline: image pretraining of the spatial network,
//! generator fine-tuning on sparse triplets, and joint video training on
//! clips mixing ground truth with generated pseudo-labels.
//!
//! Every stage is deterministic given its seed: data order comes from one
//! seeded generator, batches are single clips, and parameters sweep in
//! registry order.

use std::collections::BTreeMap;

use crate::checkpoint::Snapshot;
use crate::data::VideoClipData;
use crate::error::{Error, Result};
use crate::flow::{BinaryMask, FlowMethod};
use crate::loss::bce_with_logits;
use crate::nn::params::ParamRegistry;
use crate::nn::resize::bilinear_resize;
use crate::nn::tensor::Tensor;
use crate::optim::{Adam, AdamConfig};
use crate::pseudo::{
    build_pseudo_schedule, gt_indices, pseudo_indices, sample_triplets, AnnotationSchedule,
    FrameLabel, PseudoLabelGenerator, Triplet,
};
use crate::rng::Rng;
use crate::spatial::{Frame, SpatialConfig};
use crate::temporal::{TemporalConfig, VideoNet};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Clip length T for video training.
    pub clip_len: usize,
    pub input_size: (usize, usize),
    pub lr_pretrain: f64,
    pub lr_finetune: f64,
    pub pretrain_steps: usize,
    pub fgplg_steps: usize,
    pub video_steps: usize,
    pub seed: u64,
    pub schedule: AnnotationSchedule,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            clip_len: 4,
            input_size: (64, 64),
            lr_pretrain: 1e-4,
            lr_finetune: 1e-5,
            pretrain_steps: 300,
            fgplg_steps: 200,
            video_steps: 200,
            seed: 7,
            schedule: AnnotationSchedule { interval: 5, per_interval: 1 },
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clip_len == 0 {
            return Err(Error::Config("clip_len must be >= 1".into()));
        }
        if !self.input_size.0.is_multiple_of(16) || !self.input_size.1.is_multiple_of(16) || self.input_size.0 == 0 {
            return Err(Error::Config(format!(
                "input size {}x{} must be positive multiples of 16",
                self.input_size.0, self.input_size.1
            )));
        }
        if self.lr_pretrain <= 0.0 || self.lr_finetune <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        self.schedule.validate()
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig { lr, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }
}

/// One row of the training log, rendered as `step,stage,loss` CSV.
#[derive(Debug, Clone)]
pub struct LogRow {
    pub step: u64,
    pub stage: &'static str,
    pub loss: f64,
}

pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut s = String::from("step,stage,loss\n");
    for r in rows {
        s.push_str(&format!("{},{},{:.9}\n", r.step, r.stage, r.loss));
    }
    s
}

/// Result of one training stage: the trained parameter snapshot, the loss
/// log, the generator state at exit, and the step count.
pub struct StageOutput {
    pub params: Snapshot,
    pub log: Vec<LogRow>,
    pub rng_state: u64,
    pub steps: u64,
}

fn check_finite(loss: f64, stage: &'static str, step: u64) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Train(format!(
            "loss diverged ({loss}) at step {step} of {stage}"
        )));
    }
    Ok(())
}

/// Resize a frame to the training resolution when needed.
fn fit_frame(frame: &Frame, size: (usize, usize)) -> Result<Frame> {
    if frame.height() == size.0 && frame.width() == size.1 {
        return Ok(frame.clone());
    }
    let px = bilinear_resize(frame.pixels(), size.0, size.1)?;
    // interpolation can overshoot only at exact endpoints; clamp defensively
    let clamped: Vec<f64> = px.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    match frame.shape_state() {
        Some(state) => {
            // scale the oracle geometry along with the pixels
            let sy = size.0 as f64 / frame.height() as f64;
            let sx = size.1 as f64 / frame.width() as f64;
            let geometry = match state.geometry {
                crate::flow::ShapeGeometry::Disk { radius } => {
                    crate::flow::ShapeGeometry::Disk { radius: radius * sx.min(sy) }
                }
                crate::flow::ShapeGeometry::Rect { half_w, half_h } => {
                    crate::flow::ShapeGeometry::Rect { half_w: half_w * sx, half_h: half_h * sy }
                }
            };
            Frame::with_shape_state(
                Tensor::from_vec(&[3, size.0, size.1], clamped)?,
                crate::flow::ShapeState {
                    geometry,
                    center: (state.center.0 * sx, state.center.1 * sy),
                },
            )
        }
        None => Frame::new(Tensor::from_vec(&[3, size.0, size.1], clamped)?),
    }
}

fn fit_mask(mask: &BinaryMask, size: (usize, usize)) -> Result<BinaryMask> {
    if mask.height() == size.0 && mask.width() == size.1 {
        return Ok(mask.clone());
    }
    let soft = bilinear_resize(mask.values(), size.0, size.1)?;
    BinaryMask::from_soft(&soft, 0.5)
}

/// Stage 1: train the spatial network on still image/mask pairs.
pub fn pretrain_spatial(
    stills: &[(Frame, BinaryMask)],
    spatial_cfg: &SpatialConfig,
    cfg: &TrainConfig,
) -> Result<StageOutput> {
    cfg.validate()?;
    if stills.is_empty() {
        return Err(Error::Data("pretraining needs a nonempty image dataset".into()));
    }
    let mut rng = Rng::new(cfg.seed).fork(1);
    let mut reg = ParamRegistry::new();
    let net = crate::spatial::SpatialNet::new(spatial_cfg, &mut reg, &mut rng)?;
    let mut adam = Adam::new(cfg.adam(cfg.lr_pretrain));
    let mut log = Vec::with_capacity(cfg.pretrain_steps);

    let prepared: Vec<(Frame, BinaryMask)> = stills
        .iter()
        .map(|(f, m)| Ok((fit_frame(f, cfg.input_size)?, fit_mask(m, cfg.input_size)?)))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = Vec::new();
    for step in 0..cfg.pretrain_steps as u64 {
        if order.is_empty() {
            order = (0..prepared.len()).collect();
            rng.shuffle(&mut order);
        }
        let (frame, mask) = &prepared[order.pop().expect("refilled above")];
        let map = net.forward_single(frame)?;
        let loss = bce_with_logits(map.logits(), mask.values())?;
        let loss_val = loss.item();
        check_finite(loss_val, "pretrain", step)?;
        reg.zero_grads();
        loss.backward()?;
        adam.step(&reg)?;
        log.push(LogRow { step, stage: "pretrain", loss: loss_val });
    }
    Ok(StageOutput {
        params: reg.snapshot(),
        log,
        rng_state: rng.state(),
        steps: cfg.pretrain_steps as u64,
    })
}

/// Plan ground-truth indices for a video of the given length.
pub fn planned_gt(len: usize, schedule: &AnnotationSchedule) -> Result<Vec<usize>> {
    Ok(gt_indices(&build_pseudo_schedule(len, schedule)?))
}

/// Stage 2: fine-tune the 7-channel generator on annotated triplets spaced
/// by the schedule interval; the center annotation is the target.
pub fn train_generator(
    videos: &[VideoClipData],
    spatial_cfg: &SpatialConfig,
    cfg: &TrainConfig,
    pretrained: &Snapshot,
    flow: FlowMethod,
) -> Result<StageOutput> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed).fork(2);
    let mut reg = ParamRegistry::new();
    let gen = PseudoLabelGenerator::from_pretrained(spatial_cfg, pretrained, &mut reg, &mut rng)?;
    let mut adam = Adam::new(cfg.adam(cfg.lr_finetune));

    // all (video, triplet) pairs over planned annotations
    let mut tasks: Vec<(usize, (usize, usize, usize))> = Vec::new();
    for (vi, video) in videos.iter().enumerate() {
        let annotated = planned_gt(video.frames.len(), &cfg.schedule)?;
        for t in sample_triplets(&annotated, cfg.schedule.interval)? {
            tasks.push((vi, t));
        }
    }
    if tasks.is_empty() {
        return Err(Error::Schedule(
            "no training triplets: sequences too short for the interval".into(),
        ));
    }

    let mut log = Vec::with_capacity(cfg.fgplg_steps);
    let mut order: Vec<usize> = Vec::new();
    for step in 0..cfg.fgplg_steps as u64 {
        if order.is_empty() {
            order = (0..tasks.len()).collect();
            rng.shuffle(&mut order);
        }
        let (vi, (i, k, j)) = tasks[order.pop().expect("refilled above")];
        let video = &videos[vi];
        let triplet = Triplet::new(i, k, j)?;
        let need = |idx: usize| -> Result<&BinaryMask> {
            video.masks[idx].as_ref().ok_or_else(|| {
                Error::Data(format!("video {}: frame {idx} needs ground truth", video.name))
            })
        };
        let map = gen.generate(
            &triplet,
            &video.frames[i],
            need(i)?,
            &video.frames[k],
            &video.frames[j],
            need(j)?,
            flow,
        )?;
        let loss = bce_with_logits(map.logits(), need(k)?.values())?;
        let loss_val = loss.item();
        check_finite(loss_val, "fgplg", step)?;
        reg.zero_grads();
        loss.backward()?;
        adam.step(&reg)?;
        log.push(LogRow { step, stage: "fgplg", loss: loss_val });
    }
    Ok(StageOutput {
        params: reg.snapshot(),
        log,
        rng_state: rng.state(),
        steps: cfg.fgplg_steps as u64,
    })
}

/// Generated pseudo-labels for one video: frame index to soft map values.
pub type PseudoMaps = BTreeMap<usize, Tensor>;

/// Run a trained generator over every planned pseudo position. Interior
/// positions use the enclosing annotations; tail positions past the last
/// annotated frame fall back to the last two annotations.
pub fn generate_pseudo_labels(
    video: &VideoClipData,
    spatial_cfg: &SpatialConfig,
    generator: &Snapshot,
    schedule: &AnnotationSchedule,
    flow: FlowMethod,
    seed: u64,
) -> Result<PseudoMaps> {
    let plan = build_pseudo_schedule(video.frames.len(), schedule)?;
    let gts = gt_indices(&plan);
    let mut reg = ParamRegistry::new();
    let mut rng = Rng::new(seed).fork(3);
    let gen = PseudoLabelGenerator::new(spatial_cfg, &mut reg, &mut rng)?;
    reg.load_values(generator)?;
    let mut out = BTreeMap::new();
    for k in pseudo_indices(&plan) {
        let prev = gts.iter().copied().filter(|&g| g < k).max();
        let next = gts.iter().copied().filter(|&g| g > k).min();
        let (triplet, i, j) = match (prev, next) {
            (Some(i), Some(j)) => (Triplet::new(i, k, j)?, i, j),
            (Some(j), None) => {
                let Some(i) = gts.iter().copied().filter(|&g| g < j).max() else {
                    continue; // single annotation: nothing to warp from
                };
                (Triplet::tail(i, j, k)?, i, j)
            }
            _ => continue,
        };
        let need = |idx: usize| -> Result<&BinaryMask> {
            video.masks[idx].as_ref().ok_or_else(|| {
                Error::Data(format!("video {}: frame {idx} needs ground truth", video.name))
            })
        };
        let map = gen.generate(
            &triplet,
            &video.frames[i],
            need(i)?,
            &video.frames[k],
            &video.frames[j],
            need(j)?,
            flow,
        )?;
        out.insert(k, map.probs().detach());
    }
    Ok(out)
}

/// Clip windows covering a sequence: starts at multiples of T, with the last
/// window shifted back to fit when the tail is short.
pub fn clip_windows(len: usize, t: usize) -> Vec<(usize, usize)> {
    if len <= t {
        return vec![(0, len)];
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + t <= len {
        out.push((start, start + t));
        start += t;
    }
    if start < len {
        out.push((len - t, len));
    }
    out
}

/// Per-frame training target inside a clip.
enum Target {
    Gt(Tensor),
    Pseudo(Tensor),
    None,
}

/// Stage 3: jointly train the video model on clips. Every labeled frame
/// (ground truth or pseudo-label) contributes the same per-frame loss;
/// unlabeled frames contribute temporal context only.
pub fn train_video_model(
    videos: &[VideoClipData],
    pseudo: &[PseudoMaps],
    spatial_cfg: &SpatialConfig,
    temporal_cfg: &TemporalConfig,
    cfg: &TrainConfig,
    pretrained: &Snapshot,
) -> Result<StageOutput> {
    cfg.validate()?;
    if videos.len() != pseudo.len() {
        return Err(Error::Data(format!(
            "{} videos but {} pseudo-label sets",
            videos.len(),
            pseudo.len()
        )));
    }
    let mut rng = Rng::new(cfg.seed).fork(4);
    let mut reg = ParamRegistry::new();
    let net = VideoNet::new(spatial_cfg, temporal_cfg, &mut reg, &mut rng)?;
    // warm-start the spatial weights; temporal weights stay fresh
    for (name, (shape, values)) in pretrained {
        if let Some(tensor) = reg.get(name) {
            if tensor.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: pretrained shape {shape:?} vs model {:?}",
                    tensor.shape()
                )));
            }
            tensor.data_mut().copy_from_slice(values);
        }
    }
    let mut adam = Adam::new(cfg.adam(cfg.lr_finetune));

    // enumerate labeled clips
    struct ClipTask {
        video: usize,
        start: usize,
        end: usize,
    }
    let mut tasks = Vec::new();
    for (vi, video) in videos.iter().enumerate() {
        let plan = build_pseudo_schedule(video.frames.len(), &cfg.schedule)?;
        for (start, end) in clip_windows(video.frames.len(), cfg.clip_len) {
            let labeled = (start..end).any(|i| {
                matches!(plan[i], FrameLabel::Gt)
                    || (matches!(plan[i], FrameLabel::Pseudo) && pseudo[vi].contains_key(&i))
            });
            if labeled {
                tasks.push(ClipTask { video: vi, start, end });
            }
        }
    }
    if tasks.is_empty() {
        return Err(Error::Data("no labeled clips to train on".into()));
    }

    let mut log = Vec::with_capacity(cfg.video_steps);
    let mut order: Vec<usize> = Vec::new();
    for step in 0..cfg.video_steps as u64 {
        if order.is_empty() {
            order = (0..tasks.len()).collect();
            rng.shuffle(&mut order);
        }
        let task = &tasks[order.pop().expect("refilled above")];
        let video = &videos[task.video];
        let plan = build_pseudo_schedule(video.frames.len(), &cfg.schedule)?;
        let frames: Vec<Frame> = video.frames[task.start..task.end]
            .iter()
            .map(|f| fit_frame(f, cfg.input_size))
            .collect::<Result<_>>()?;
        let targets: Vec<Target> = (task.start..task.end)
            .map(|i| -> Result<Target> {
                Ok(match plan[i] {
                    FrameLabel::Gt => {
                        let mask = video.masks[i].as_ref().ok_or_else(|| {
                            Error::Data(format!(
                                "video {}: plan marks frame {i} as ground truth but no mask exists",
                                video.name
                            ))
                        })?;
                        Target::Gt(fit_mask(mask, cfg.input_size)?.values().clone())
                    }
                    FrameLabel::Pseudo => match pseudo[task.video].get(&i) {
                        Some(map) => {
                            let sized = if map.shape()[1..] == [cfg.input_size.0, cfg.input_size.1]
                            {
                                map.clone()
                            } else {
                                bilinear_resize(map, cfg.input_size.0, cfg.input_size.1)?
                            };
                            Target::Pseudo(sized)
                        }
                        None => Target::None,
                    },
                    FrameLabel::Unlabeled => Target::None,
                })
            })
            .collect::<Result<_>>()?;

        let maps = net.video_forward(&frames)?;
        let mut loss: Option<Tensor> = None;
        for (map, target) in maps.iter().zip(&targets) {
            let term = match target {
                Target::Gt(values) | Target::Pseudo(values) => {
                    Some(bce_with_logits(map.logits(), values)?)
                }
                Target::None => None,
            };
            if let Some(term) = term {
                loss = Some(match loss {
                    Some(acc) => crate::nn::ops::add(&acc, &term)?,
                    None => term,
                });
            }
        }
        let loss = loss.expect("tasks contain a labeled frame");
        let loss_val = loss.item();
        check_finite(loss_val, "video", step)?;
        reg.zero_grads();
        loss.backward()?;
        adam.step(&reg)?;
        log.push(LogRow { step, stage: "video", loss: loss_val });
    }
    Ok(StageOutput {
        params: reg.snapshot(),
        log,
        rng_state: rng.state(),
        steps: cfg.video_steps as u64,
    })
}

/// Load a snapshot into a freshly built video model for inference.
pub fn video_net_from_snapshot(
    spatial_cfg: &SpatialConfig,
    temporal_cfg: &TemporalConfig,
    snapshot: &Snapshot,
) -> Result<VideoNet> {
    let mut reg = ParamRegistry::new();
    let mut rng = Rng::new(0);
    let net = VideoNet::new(spatial_cfg, temporal_cfg, &mut reg, &mut rng)?;
    reg.load_values(snapshot)?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_clip, SynthSpec};

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            input_size: (32, 32),
            pretrain_steps: 3,
            fgplg_steps: 3,
            video_steps: 3,
            ..TrainConfig::default()
        }
    }

    fn tiny_spatial() -> SpatialConfig {
        SpatialConfig {
            backbone: crate::spatial::BackboneConfig {
                stage_channels: [4, 6, 8, 8, 8],
                aspp_rates: vec![1, 4],
                aspp_out_channels: 8,
                ..Default::default()
            },
            classifier: crate::spatial::ClassifierConfig {
                skip_out_channels: 2,
                refine_channels: 8,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn clip_data() -> VideoClipData {
        let spec = SynthSpec {
            num_videos: 1,
            frames_per_video: 12,
            height: 32,
            width: 32,
            ..Default::default()
        };
        (&synth_clip(&spec, 0).unwrap()).into()
    }

    #[test]
    fn initial_pretrain_loss_is_ln_two() {
        // zero-initialized classifier emits uniform 0 logits
        let video = clip_data();
        let stills = vec![(video.frames[0].clone(), video.masks[0].clone().unwrap())];
        let out = pretrain_spatial(&stills, &tiny_spatial(), &tiny_cfg()).unwrap();
        assert!((out.log[0].loss - 2.0_f64.ln()).abs() < 1e-12, "{}", out.log[0].loss);
    }

    #[test]
    fn pretrain_is_deterministic_and_seed_sensitive() {
        let video = clip_data();
        let stills = vec![
            (video.frames[0].clone(), video.masks[0].clone().unwrap()),
            (video.frames[5].clone(), video.masks[5].clone().unwrap()),
        ];
        let run = |seed: u64| {
            let cfg = TrainConfig { seed, ..tiny_cfg() };
            pretrain_spatial(&stills, &tiny_spatial(), &cfg).unwrap()
        };
        let a = run(7);
        let b = run(7);
        let c = run(8);
        let bits = |s: &StageOutput| {
            s.params
                .values()
                .flat_map(|(_, v)| v.iter().map(|x| x.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn generator_training_runs_and_logs() {
        let video = clip_data();
        let cfg = tiny_cfg();
        let pre = pretrain_spatial(
            &[(video.frames[0].clone(), video.masks[0].clone().unwrap())],
            &tiny_spatial(),
            &cfg,
        )
        .unwrap();
        let out = train_generator(
            &[video],
            &tiny_spatial(),
            &cfg,
            &pre.params,
            FlowMethod::Oracle,
        )
        .unwrap();
        assert_eq!(out.log.len(), 3);
        assert!(out.log.iter().all(|r| r.stage == "fgplg" && r.loss.is_finite()));
    }

    #[test]
    fn clip_window_layout() {
        assert_eq!(clip_windows(12, 4), vec![(0, 4), (4, 8), (8, 12)]);
        assert_eq!(clip_windows(10, 4), vec![(0, 4), (4, 8), (6, 10)]);
        assert_eq!(clip_windows(3, 4), vec![(0, 3)]);
        assert_eq!(clip_windows(4, 4), vec![(0, 4)]);
    }

    #[test]
    fn swapping_gt_for_identical_pseudo_keeps_loss_bitwise_equal() {
        // the same supervision values once as all ground truth and once with
        // every other frame routed through the pseudo channel: the first-step
        // loss must be identical to the bit
        let video = clip_data();
        let pre = pretrain_spatial(
            &[(video.frames[0].clone(), video.masks[0].clone().unwrap())],
            &tiny_spatial(),
            &tiny_cfg(),
        )
        .unwrap();
        let run = |schedule: AnnotationSchedule, pseudo_from_masks: bool| {
            let cfg = TrainConfig { video_steps: 1, schedule, ..tiny_cfg() };
            let video = clip_data();
            let mut pseudo = BTreeMap::new();
            if pseudo_from_masks {
                let plan = build_pseudo_schedule(video.frames.len(), &schedule).unwrap();
                for k in pseudo_indices(&plan) {
                    pseudo.insert(k, video.masks[k].clone().unwrap().values().clone());
                }
            }
            let out = train_video_model(
                &[video],
                &[pseudo],
                &tiny_spatial(),
                &TemporalConfig::disabled(),
                &cfg,
                &pre.params,
            )
            .unwrap();
            out.log[0].loss
        };
        // every frame labeled: (1,0) marks all as ground truth; (2,1) marks
        // half as pseudo-labels carrying exactly the true mask values
        let all_gt = run(AnnotationSchedule::new(1, 0).unwrap(), false);
        let half_pseudo = run(AnnotationSchedule::new(2, 1).unwrap(), true);
        assert_eq!(all_gt.to_bits(), half_pseudo.to_bits());
    }

    #[test]
    fn non_finite_loss_aborts_with_diagnostics() {
        let video = clip_data();
        let cfg = TrainConfig { video_steps: 3, ..tiny_cfg() };
        let pre = pretrain_spatial(
            &[(video.frames[0].clone(), video.masks[0].clone().unwrap())],
            &tiny_spatial(),
            &cfg,
        )
        .unwrap();
        // poison one parameter so the first forward pass emits NaN
        let mut poisoned = pre.params.clone();
        poisoned.get_mut("classifier.weight").unwrap().1[0] = f64::NAN;
        match train_video_model(
            &[clip_data()],
            &[BTreeMap::new()],
            &tiny_spatial(),
            &TemporalConfig::disabled(),
            &cfg,
            &poisoned,
        ) {
            Err(Error::Train(msg)) => {
                assert!(msg.contains("diverged") && msg.contains("video"), "{msg}");
            }
            other => panic!("expected divergence error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn video_training_decreases_loss_on_single_clip() {
        let video = clip_data();
        let cfg = TrainConfig {
            video_steps: 50,
            lr_finetune: 2e-3,
            clip_len: 4,
            ..tiny_cfg()
        };
        let pre = pretrain_spatial(
            &[(video.frames[0].clone(), video.masks[0].clone().unwrap())],
            &tiny_spatial(),
            &TrainConfig { pretrain_steps: 20, lr_pretrain: 1e-3, ..tiny_cfg() },
        )
        .unwrap();
        let short = VideoClipData {
            name: video.name.clone(),
            frames: video.frames[..4].to_vec(),
            masks: video.masks[..4].to_vec(),
        };
        let out = train_video_model(
            &[short],
            &[BTreeMap::new()],
            &tiny_spatial(),
            &TemporalConfig::disabled(),
            &cfg,
            &pre.params,
        )
        .unwrap();
        // smoothed: mean of the last 10 losses well below the first 10
        let first: f64 = out.log[..10].iter().map(|r| r.loss).sum::<f64>() / 10.0;
        let last: f64 = out.log[40..].iter().map(|r| r.loss).sum::<f64>() / 10.0;
        assert!(last < first, "first {first}, last {last}");
    }
}
