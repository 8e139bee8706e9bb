//! The whole pipeline end to end, in miniature: synthesize videos, pretrain
//! on sparse annotations, train the label generator, produce pseudo-labels,
//! jointly train the video model on both label kinds, and compare held-out
//! scores against a ground-truth-only run.
//!
//! ```bash
//! cargo run --example semi_supervised_training
//! ```

use std::collections::BTreeMap;

use vsod::data::VideoClipData;
use vsod::flow::FlowMethod;
use vsod::metrics::{max_f_measure, pr_curve, MetricsConfig};
use vsod::pseudo::{build_pseudo_schedule, AnnotationSchedule, FrameLabel};
use vsod::spatial::SpatialConfig;
use vsod::synth::{synth_dataset, SynthSpec};
use vsod::temporal::TemporalConfig;
use vsod::train::{
    clip_windows, generate_pseudo_labels, pretrain_spatial, train_generator, train_video_model,
    video_net_from_snapshot, TrainConfig,
};

fn main() -> vsod::Result<()> {
    let spec = SynthSpec { num_videos: 4, frames_per_video: 16, seed: 13, ..SynthSpec::default() };
    let videos: Vec<VideoClipData> = synth_dataset(&spec)?.iter().map(|c| c.into()).collect();
    let schedule = AnnotationSchedule::new(5, 1)?;
    let spatial = SpatialConfig::default();
    let temporal = TemporalConfig::default();
    let cfg = TrainConfig {
        lr_pretrain: 2e-3,
        lr_finetune: 1e-3,
        pretrain_steps: 250,
        fgplg_steps: 150,
        video_steps: 100,
        schedule,
        seed: 13,
        ..TrainConfig::default()
    };

    // sparse annotations only
    let mut stills = Vec::new();
    for video in &videos {
        for idx in vsod::train::planned_gt(video.frames.len(), &schedule)? {
            stills.push((video.frames[idx].clone(), video.masks[idx].clone().unwrap()));
        }
    }
    println!("[1/4] pretraining on {} annotated stills", stills.len());
    let pre = pretrain_spatial(&stills, &spatial, &cfg)?;

    println!("[2/4] training the flow-guided label generator");
    let gen = train_generator(&videos, &spatial, &cfg, &pre.params, FlowMethod::Oracle)?;

    println!("[3/4] generating pseudo-labels");
    let mut pseudo = Vec::new();
    for video in &videos {
        pseudo.push(generate_pseudo_labels(
            video,
            &spatial,
            &gen.params,
            &schedule,
            FlowMethod::Oracle,
            cfg.seed,
        )?);
    }
    println!(
        "      {} pseudo-labels generated",
        pseudo.iter().map(BTreeMap::len).sum::<usize>()
    );

    println!("[4/4] joint video training: ground truth + pseudo vs ground truth only");
    let with_pseudo = train_video_model(&videos, &pseudo, &spatial, &temporal, &cfg, &pre.params)?;
    let empty: Vec<_> = videos.iter().map(|_| BTreeMap::new()).collect();
    let gt_only = train_video_model(&videos, &empty, &spatial, &temporal, &cfg, &pre.params)?;

    // held-out frames: unlabeled under the denser plan
    let plan = build_pseudo_schedule(videos[0].frames.len(), &schedule)?;
    let held_out: Vec<usize> = plan
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == FrameLabel::Unlabeled)
        .map(|(i, _)| i)
        .collect();
    let mcfg = MetricsConfig::default();
    let score = |snapshot: &vsod::checkpoint::Snapshot| -> vsod::Result<f64> {
        let net = video_net_from_snapshot(&spatial, &temporal, snapshot)?;
        let mut pairs = Vec::new();
        for video in &videos {
            let mut preds: Vec<Option<_>> = vec![None; video.frames.len()];
            for (s, e) in clip_windows(video.frames.len(), cfg.clip_len) {
                for (off, map) in net.video_forward(&video.frames[s..e])?.into_iter().enumerate() {
                    preds[s + off] = Some(map.probs().detach());
                }
            }
            for &idx in &held_out {
                pairs.push((preds[idx].clone().unwrap(), video.masks[idx].clone().unwrap()));
            }
        }
        let refs: Vec<_> = pairs.iter().map(|(p, g)| (p, g)).collect();
        Ok(max_f_measure(&pr_curve(&refs, &mcfg)?, &mcfg))
    };
    let dense = score(&with_pseudo.params)?;
    let sparse = score(&gt_only.params)?;
    println!("held-out max F: with pseudo-labels {dense:.4}, ground truth only {sparse:.4}");
    Ok(())
}
