//! Generate a synthetic moving-shapes dataset and write it to disk in the
//! standard layout (frames/, masks/, motion.txt, splits/train.txt).
//!
//! ```bash
//! cargo run --example synthesize_dataset -- /tmp/vsod_demo/data
//! ```

use vsod::data::write_dataset;
use vsod::synth::{synth_dataset, SynthSpec};

fn main() -> vsod::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "/tmp/vsod_demo/data".to_string());
    let spec = SynthSpec { num_videos: 4, frames_per_video: 20, seed: 42, ..SynthSpec::default() };
    let clips = synth_dataset(&spec)?;

    for clip in &clips {
        let moved: f64 = clip
            .states
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].center, w[1].center);
                ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
            })
            .sum();
        println!(
            "{}: {} frames, foreground {:>3} px in frame 0, path length {moved:.0} px",
            clip.name,
            clip.frames.len(),
            clip.masks[0].foreground_count(),
        );
    }

    write_dataset(std::path::Path::new(&out), &clips)?;
    println!("dataset written to {out}");
    Ok(())
}
