//! Run the full video model (spatial network + temporal module) over a clip
//! and inspect the per-frame saliency maps.
//!
//! ```bash
//! cargo run --example video_inference
//! ```

use vsod::nn::ParamRegistry;
use vsod::rng::Rng;
use vsod::spatial::SpatialConfig;
use vsod::synth::{synth_clip, SynthSpec};
use vsod::temporal::{TemporalConfig, VideoNet};

fn main() -> vsod::Result<()> {
    let spec = SynthSpec { num_videos: 1, frames_per_video: 4, seed: 5, ..SynthSpec::default() };
    let clip = synth_clip(&spec, 0)?;

    let mut reg = ParamRegistry::new();
    let mut rng = Rng::new(1);
    let net = VideoNet::new(&SpatialConfig::default(), &TemporalConfig::default(), &mut reg, &mut rng)?;
    println!(
        "video model: {} parameter tensors, {} values",
        reg.len(),
        reg.total_values()
    );

    let maps = net.video_forward(&clip.frames)?;
    for (t, map) in maps.iter().enumerate() {
        let probs = map.probs();
        let d = probs.data();
        let mean: f64 = d.iter().sum::<f64>() / d.len() as f64;
        let peak = d.iter().cloned().fold(0.0, f64::max);
        println!(
            "frame {t}: map {}x{}, mean saliency {mean:.3}, peak {peak:.3}",
            map.height(),
            map.width()
        );
    }
    println!("(an untrained classifier starts at a uniform 0.5 map by design)");
    Ok(())
}
