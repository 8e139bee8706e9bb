//! Pretrain the spatial network on still image/mask pairs and watch the
//! loss fall; save a checkpoint at the end.
//!
//! ```bash
//! cargo run --example image_pretraining -- /tmp/vsod_demo/pretrained.ckpt
//! ```

use vsod::checkpoint::Checkpoint;
use vsod::spatial::SpatialConfig;
use vsod::synth::{synth_dataset, SynthSpec};
use vsod::train::{pretrain_spatial, TrainConfig};

fn main() -> vsod::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "/tmp/vsod_demo/pretrained.ckpt".into());
    let spec = SynthSpec { num_videos: 4, frames_per_video: 6, seed: 9, ..SynthSpec::default() };
    let stills: Vec<_> = synth_dataset(&spec)?
        .iter()
        .flat_map(|clip| {
            clip.frames.iter().cloned().zip(clip.masks.iter().cloned()).step_by(3)
        })
        .collect();
    println!("pretraining on {} stills", stills.len());

    let cfg = TrainConfig { pretrain_steps: 150, lr_pretrain: 1e-3, seed: 9, ..TrainConfig::default() };
    let stage = pretrain_spatial(&stills, &SpatialConfig::default(), &cfg)?;
    for row in stage.log.iter().step_by(25) {
        println!("step {:>4}  loss {:.5}", row.step, row.loss);
    }
    println!("final loss {:.5}", stage.log.last().map(|r| r.loss).unwrap_or(f64::NAN));

    if let Some(parent) = std::path::Path::new(&out).parent() {
        std::fs::create_dir_all(parent).ok();
    }
    Checkpoint::new("example", stage.steps, stage.rng_state, stage.params)
        .save(std::path::Path::new(&out))?;
    println!("checkpoint written to {out}");
    Ok(())
}
