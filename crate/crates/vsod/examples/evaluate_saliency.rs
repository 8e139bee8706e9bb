//! Score saliency predictions against binary ground truth: PR curve,
//! maximum F-measure, S-measure, Jaccard index, and boundary accuracy.
//!
//! ```bash
//! cargo run --example evaluate_saliency
//! ```

use vsod::flow::BinaryMask;
use vsod::metrics::{evaluate_videos, max_f_measure, pr_curve, MetricsConfig};
use vsod::nn::Tensor;
use vsod::rng::Rng;

fn main() -> vsod::Result<()> {
    let (h, w) = (32usize, 32usize);
    let gt = BinaryMask::from_bools(h, w, |r, c| {
        let (dr, dc) = (r as f64 - 14.0, c as f64 - 18.0);
        dr * dr + dc * dc <= 49.0
    });

    // a blurry but well-ranked predictor: high inside, sloping off outside
    let mut rng = Rng::new(4);
    let vals: Vec<f64> = (0..h * w)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            let (dr, dc) = (r as f64 - 14.0, c as f64 - 18.0);
            let d = (dr * dr + dc * dc).sqrt();
            ((1.0 / (1.0 + (d - 7.0).exp())) + rng.uniform(-0.05, 0.05)).clamp(0.0, 1.0)
        })
        .collect();
    let pred = Tensor::from_vec(&[1, h, w], vals)?;

    let cfg = MetricsConfig::default();
    let curve = pr_curve(&[(&pred, &gt)], &cfg)?;
    println!("max F  = {:.4}  (beta^2 = {})", max_f_measure(&curve, &cfg), cfg.beta_sq);

    let report = evaluate_videos(&[("demo".into(), vec![(pred, gt)])], &cfg)?;
    print!("{}", report.to_text());

    println!("\nfirst PR rows:");
    for line in curve.to_csv().lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
