//! The semi-supervised core: keep one annotation every five frames, train
//! the flow-guided generator on annotated triplets, then fill the gaps with
//! generated pseudo-labels and measure their quality against the withheld
//! true masks.
//!
//! ```bash
//! cargo run --example pseudo_label_generation
//! ```

use vsod::data::VideoClipData;
use vsod::flow::{BinaryMask, FlowMethod};
use vsod::pseudo::AnnotationSchedule;
use vsod::spatial::SpatialConfig;
use vsod::synth::{synth_dataset, SynthSpec};
use vsod::train::{generate_pseudo_labels, pretrain_spatial, train_generator, TrainConfig};

fn main() -> vsod::Result<()> {
    let spec = SynthSpec { num_videos: 4, frames_per_video: 16, seed: 21, ..SynthSpec::default() };
    let videos: Vec<VideoClipData> = synth_dataset(&spec)?.iter().map(|c| c.into()).collect();
    let schedule = AnnotationSchedule::new(5, 1)?;
    let cfg = TrainConfig {
        lr_pretrain: 2e-3,
        lr_finetune: 1e-3,
        pretrain_steps: 250,
        fgplg_steps: 150,
        schedule,
        seed: 21,
        ..TrainConfig::default()
    };
    let spatial = SpatialConfig::default();

    // stage 1: image pretraining on the sparse annotated frames
    let mut stills = Vec::new();
    for video in &videos {
        for idx in vsod::train::planned_gt(video.frames.len(), &schedule)? {
            stills.push((video.frames[idx].clone(), video.masks[idx].clone().unwrap()));
        }
    }
    println!("{} annotated stills across {} videos", stills.len(), videos.len());
    let pre = pretrain_spatial(&stills, &spatial, &cfg)?;
    println!("pretraining done (loss {:.4})", pre.log.last().unwrap().loss);

    // stage 2: generator fine-tuning on (k-5, k, k+5) triplets
    let gen = train_generator(&videos, &spatial, &cfg, &pre.params, FlowMethod::Oracle)?;
    println!("generator tuned (loss {:.4})", gen.log.last().unwrap().loss);

    // stage 3: pseudo-labels for the interior positions
    let mut sum = 0.0;
    let mut count = 0;
    for video in &videos {
        let maps =
            generate_pseudo_labels(video, &spatial, &gen.params, &schedule, FlowMethod::Oracle, 21)?;
        for (idx, map) in &maps {
            let hard = BinaryMask::from_soft(map, 0.5)?;
            let iou = hard.iou(video.masks[*idx].as_ref().unwrap());
            sum += iou;
            count += 1;
            println!("{} frame {idx:>2}: pseudo-label IoU {iou:.3}", video.name);
        }
    }
    println!("mean pseudo-label IoU over {count} frames: {:.3}", sum / count as f64);
    Ok(())
}
