//! Command-line surface.
//!
//! Subcommands: `synth`, `pretrain`, `train-fgplg`, `gen-pseudo`, `train`,
//! `eval`, `plot-pr`. Global flags `--config PATH` and `--seed N` apply
//! everywhere; `VSOD_SEED` overrides the configured seed and is itself
//! overridden by `--seed`. Exit code 0 on success, 1 on runtime failure,
//! 2 on usage errors, with a one-line diagnostic on stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::checkpoint::Checkpoint;
use crate::config::AppConfig;
use crate::data::{
    check_manifest_consistency, load_dataset, load_soft_map, read_plan_manifest, save_outputs,
    write_dataset, write_plan_manifest, PlanEntry, VideoClipData,
};
use crate::error::{Error, Result};
use crate::flow::{BinaryMask, FlowMethod};
use crate::metrics::{evaluate_videos, max_f_measure, pr_curve, MetricReport};
use crate::nn::tensor::Tensor;
use crate::pseudo::{build_pseudo_schedule, FrameLabel};
use crate::synth::synth_dataset;
use crate::train::{
    clip_windows, generate_pseudo_labels, log_to_csv, planned_gt, pretrain_spatial,
    train_generator, train_video_model, video_net_from_snapshot, PseudoMaps, StageOutput,
};

const USAGE: &str = "usage: vsod <synth|pretrain|train-fgplg|gen-pseudo|train|eval|plot-pr> [flags]";

/// Entry point: parse, dispatch, and map errors to exit codes.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    match dispatch(args.into_iter().collect()) {
        Ok(()) => 0,
        Err(e @ Error::Usage(_)) => {
            eprintln!("{e}");
            eprintln!("{USAGE}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Flags {
    values: BTreeMap<String, String>,
}

impl Flags {
    fn parse(args: &[String], allowed: &[&str]) -> Result<Flags> {
        let mut values = BTreeMap::new();
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let Some(name) = arg.strip_prefix("--") else {
                return Err(Error::Usage(format!("unexpected argument: {arg}")));
            };
            if !allowed.contains(&name) {
                return Err(Error::Usage(format!("unknown flag: --{name}")));
            }
            let Some(value) = it.next() else {
                return Err(Error::Usage(format!("flag --{name} needs a value")));
            };
            if values.insert(name.to_string(), value.clone()).is_some() {
                return Err(Error::Usage(format!("flag --{name} given twice")));
            }
        }
        Ok(Flags { values })
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    fn require(&self, name: &str) -> Result<&str> {
        self.get(name).ok_or_else(|| Error::Usage(format!("missing required flag --{name}")))
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.require(name)?))
    }
}

/// Build the effective config: defaults, then file, then environment seed,
/// then explicit flags.
fn effective_config(flags: &Flags) -> Result<AppConfig> {
    let mut cfg = match flags.get("config") {
        Some(path) => AppConfig::load(Path::new(path))?,
        None => AppConfig::default(),
    };
    if let Ok(seed) = std::env::var("VSOD_SEED") {
        let seed = seed
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("VSOD_SEED is not an integer: {seed}")))?;
        cfg.train.seed = seed;
        cfg.synth.seed = seed;
    }
    if let Some(seed) = flags.get("seed") {
        let seed = seed
            .parse::<u64>()
            .map_err(|_| Error::Usage(format!("--seed is not an integer: {seed}")))?;
        cfg.train.seed = seed;
        cfg.synth.seed = seed;
    }
    for (flag, key) in [
        ("interval", "train.interval"),
        ("per-interval", "train.per_interval"),
        ("clip-len", "train.clip_len"),
    ] {
        if let Some(v) = flags.get(flag) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn flow_method(flags: &Flags) -> Result<FlowMethod> {
    match flags.get("flow").unwrap_or("oracle") {
        "oracle" => Ok(FlowMethod::Oracle),
        "block_matching" => Ok(FlowMethod::block_matching_default()),
        other => Err(Error::Usage(format!(
            "unknown flow method {other} (expected oracle or block_matching)"
        ))),
    }
}

fn dispatch(args: Vec<String>) -> Result<()> {
    let Some(command) = args.first() else {
        return Err(Error::Usage("no subcommand given".into()));
    };
    let rest = &args[1..];
    match command.as_str() {
        "synth" => cmd_synth(rest),
        "pretrain" => cmd_pretrain(rest),
        "train-fgplg" => cmd_train_fgplg(rest),
        "gen-pseudo" => cmd_gen_pseudo(rest),
        "train" => cmd_train(rest),
        "eval" => cmd_eval(rest),
        "plot-pr" => cmd_plot_pr(rest),
        other => Err(Error::Usage(format!("unknown subcommand: {other}"))),
    }
}

fn load_split(flags: &Flags, cfg_root: &Path) -> Result<Vec<VideoClipData>> {
    let split = flags.get("split").unwrap_or("train");
    let dataset = load_dataset(cfg_root, split)?;
    dataset.videos.iter().map(|v| v.load_all()).collect()
}

fn write_stage_artifacts(out: &Path, stage: &StageOutput, cfg: &AppConfig) -> Result<()> {
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let ckpt = Checkpoint::new(&cfg.digest(), stage.steps, stage.rng_state, stage.params.clone());
    ckpt.save(out)?;
    let log_path = out.with_extension("log.csv");
    std::fs::write(&log_path, log_to_csv(&stage.log)).map_err(|e| Error::io(&log_path, e))?;
    Ok(())
}

fn cmd_synth(args: &[String]) -> Result<()> {
    let flags = Flags::parse(
        args,
        &["out", "config", "seed", "videos", "frames", "height", "width", "motion", "distractor", "contrast"],
    )?;
    let mut cfg = effective_config(&flags)?;
    for (flag, key) in [
        ("videos", "synth.videos"),
        ("frames", "synth.frames"),
        ("height", "synth.height"),
        ("width", "synth.width"),
        ("motion", "synth.motion"),
        ("distractor", "synth.distractor"),
        ("contrast", "synth.contrast"),
    ] {
        if let Some(v) = flags.get(flag) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    let out = flags.path("out")?;
    let clips = synth_dataset(&cfg.synth)?;
    write_dataset(&out, &clips)?;
    println!(
        "wrote {} videos x {} frames ({}x{}) to {}",
        cfg.synth.num_videos,
        cfg.synth.frames_per_video,
        cfg.synth.height,
        cfg.synth.width,
        out.display()
    );
    Ok(())
}

fn cmd_pretrain(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["data", "out", "split", "steps", "config", "seed"])?;
    let mut cfg = effective_config(&flags)?;
    if let Some(steps) = flags.get("steps") {
        cfg.set("train.pretrain_steps", steps)?;
    }
    let videos = load_split(&flags, &flags.path("data")?)?;
    // stills: every planned ground-truth frame across the split
    let mut stills = Vec::new();
    for video in &videos {
        for idx in planned_gt(video.frames.len(), &cfg.train.schedule)? {
            let mask = video.masks[idx].as_ref().ok_or_else(|| {
                Error::Data(format!(
                    "video {}: planned ground truth frame {idx} has no mask",
                    video.name
                ))
            })?;
            stills.push((video.frames[idx].clone(), mask.clone()));
        }
    }
    let stage = pretrain_spatial(&stills, &cfg.spatial, &cfg.train)?;
    let out = flags.path("out")?;
    write_stage_artifacts(&out, &stage, &cfg)?;
    let final_loss = stage.log.last().map(|r| r.loss).unwrap_or(f64::NAN);
    println!("pretrained on {} stills for {} steps (final loss {final_loss:.6}); checkpoint at {}",
        stills.len(), stage.steps, out.display());
    Ok(())
}

fn cmd_train_fgplg(args: &[String]) -> Result<()> {
    let flags = Flags::parse(
        args,
        &["data", "pretrained", "out", "split", "steps", "interval", "flow", "config", "seed"],
    )?;
    let mut cfg = effective_config(&flags)?;
    if let Some(steps) = flags.get("steps") {
        cfg.set("train.fgplg_steps", steps)?;
    }
    let videos = load_split(&flags, &flags.path("data")?)?;
    let pretrained = Checkpoint::load(&flags.path("pretrained")?)?;
    let flow = flow_method(&flags)?;
    let stage = train_generator(&videos, &cfg.spatial, &cfg.train, &pretrained.params, flow)?;
    let out = flags.path("out")?;
    write_stage_artifacts(&out, &stage, &cfg)?;
    let final_loss = stage.log.last().map(|r| r.loss).unwrap_or(f64::NAN);
    println!(
        "trained label generator for {} steps (final loss {final_loss:.6}); checkpoint at {}",
        stage.steps,
        out.display()
    );
    Ok(())
}

fn cmd_gen_pseudo(args: &[String]) -> Result<()> {
    let flags = Flags::parse(
        args,
        &["data", "fgplg", "out", "interval", "per-interval", "flow", "split", "config", "seed"],
    )?;
    let cfg = effective_config(&flags)?;
    let data_root = flags.path("data")?;
    let videos = load_split(&flags, &data_root)?;
    let generator = Checkpoint::load(&flags.path("fgplg")?)?;
    let flow = flow_method(&flags)?;
    let out_root = flags.path("out")?;
    let schedule = cfg.train.schedule;
    let mut total_gt = 0usize;
    let mut total_pseudo = 0usize;
    for video in &videos {
        let plan = build_pseudo_schedule(video.frames.len(), &schedule)?;
        let maps = generate_pseudo_labels(
            video,
            &cfg.spatial,
            &generator.params,
            &schedule,
            flow,
            cfg.train.seed,
        )?;
        let vdir = out_root.join(&video.name);
        std::fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
        let mut entries = Vec::with_capacity(plan.len());
        for (idx, label) in plan.iter().enumerate() {
            let source = match label {
                FrameLabel::Gt => {
                    total_gt += 1;
                    Some(format!("{}/masks/{:05}.png", video.name, idx))
                }
                FrameLabel::Pseudo => {
                    let Some(map) = maps.get(&idx) else {
                        return Err(Error::Data(format!(
                            "video {}: no pseudo-label generated for frame {idx}",
                            video.name
                        )));
                    };
                    let sh = map.shape().to_vec();
                    let name = format!("{idx:05}.png");
                    crate::imageio::save_gray(&vdir.join(&name), sh[1], sh[2], &map.data())?;
                    total_pseudo += 1;
                    Some(name)
                }
                FrameLabel::Unlabeled => None,
            };
            entries.push(PlanEntry { index: idx, label: *label, source });
        }
        write_plan_manifest(&vdir.join("plan.txt"), &entries)?;
        check_manifest_consistency(&vdir, &entries)?;
    }
    println!(
        "wrote {total_pseudo} pseudo-labels ({total_gt} ground-truth entries) under {}",
        out_root.display()
    );
    Ok(())
}

fn load_pseudo_dir(
    pseudo_root: &Path,
    videos: &[VideoClipData],
) -> Result<Vec<PseudoMaps>> {
    let mut out = Vec::with_capacity(videos.len());
    for video in videos {
        let vdir = pseudo_root.join(&video.name);
        let manifest = vdir.join("plan.txt");
        let mut maps = PseudoMaps::new();
        if manifest.is_file() {
            let entries = read_plan_manifest(&manifest)?;
            check_manifest_consistency(&vdir, &entries)?;
            for e in &entries {
                if e.label == FrameLabel::Pseudo {
                    let src = e.source.as_ref().expect("checked by consistency pass");
                    maps.insert(e.index, load_soft_map(&vdir.join(src))?);
                }
            }
        }
        out.push(maps);
    }
    Ok(out)
}

fn cmd_train(args: &[String]) -> Result<()> {
    let flags = Flags::parse(
        args,
        &[
            "data", "pretrained", "out", "pseudo", "clip-len", "interval", "per-interval",
            "steps", "split", "config", "seed",
        ],
    )?;
    let mut cfg = effective_config(&flags)?;
    if let Some(steps) = flags.get("steps") {
        cfg.set("train.video_steps", steps)?;
    }
    cfg.validate()?;
    let videos = load_split(&flags, &flags.path("data")?)?;
    let pretrained = Checkpoint::load(&flags.path("pretrained")?)?;
    let pseudo = match flags.get("pseudo") {
        Some(dir) => load_pseudo_dir(Path::new(dir), &videos)?,
        None => videos.iter().map(|_| PseudoMaps::new()).collect(),
    };
    let stage = train_video_model(
        &videos,
        &pseudo,
        &cfg.spatial,
        &cfg.temporal,
        &cfg.train,
        &pretrained.params,
    )?;
    let out = flags.path("out")?;
    write_stage_artifacts(&out, &stage, &cfg)?;
    let final_loss = stage.log.last().map(|r| r.loss).unwrap_or(f64::NAN);
    println!(
        "trained video model for {} steps (final loss {final_loss:.6}); checkpoint at {}",
        stage.steps,
        out.display()
    );
    Ok(())
}

/// Per-video predictions aligned with ground truth, from a directory of
/// saved maps or by running a checkpointed model.
type VideoPredictions = Vec<(String, Vec<(Tensor, BinaryMask)>)>;
type SavedMaps = Vec<(String, Vec<(String, usize, usize, Vec<f64>)>)>;

fn gather_predictions(
    flags: &Flags,
    cfg: &AppConfig,
    videos: &[VideoClipData],
) -> Result<VideoPredictions> {
    let from_dir = flags.get("pred");
    let from_ckpt = flags.get("ckpt");
    let mut save_stash: SavedMaps = Vec::new();
    let mut out = Vec::new();
    match (from_dir, from_ckpt) {
        (Some(dir), None) => {
            let root = Path::new(dir);
            for video in videos {
                let mut pairs = Vec::new();
                for (idx, mask) in video.masks.iter().enumerate() {
                    let Some(mask) = mask else { continue };
                    let path = root.join(&video.name).join(format!("{idx:05}.png"));
                    if !path.is_file() {
                        return Err(Error::Data(format!(
                            "missing prediction for {} frame {idx}: {}",
                            video.name,
                            path.display()
                        )));
                    }
                    pairs.push((load_soft_map(&path)?, mask.clone()));
                }
                out.push((video.name.clone(), pairs));
            }
        }
        (None, Some(ckpt)) => {
            let ckpt = Checkpoint::load(Path::new(ckpt))?;
            let net = video_net_from_snapshot(&cfg.spatial, &cfg.temporal, &ckpt.params)?;
            for video in videos {
                let mut preds: Vec<Option<Tensor>> = vec![None; video.frames.len()];
                for (start, end) in clip_windows(video.frames.len(), cfg.train.clip_len) {
                    let maps = net.video_forward(&video.frames[start..end])?;
                    for (offset, map) in maps.into_iter().enumerate() {
                        preds[start + offset] = Some(map.probs().detach());
                    }
                }
                let mut pairs = Vec::new();
                let mut stash = Vec::new();
                for (idx, mask) in video.masks.iter().enumerate() {
                    let pred = preds[idx].take().expect("windows cover every frame");
                    let sh = pred.shape().to_vec();
                    stash.push((format!("{idx:05}"), sh[1], sh[2], pred.to_vec()));
                    if let Some(mask) = mask {
                        pairs.push((pred, mask.clone()));
                    }
                }
                save_stash.push((video.name.clone(), stash));
                out.push((video.name.clone(), pairs));
            }
        }
        _ => {
            return Err(Error::Usage(
                "provide exactly one of --pred DIR or --ckpt CHECKPOINT".into(),
            ))
        }
    }
    if let Some(dir) = flags.get("save-maps") {
        if save_stash.is_empty() {
            return Err(Error::Usage("--save-maps needs --ckpt (maps are computed)".into()));
        }
        for (video, maps) in &save_stash {
            save_outputs(&Path::new(dir).join(video), maps)?;
        }
    }
    Ok(out)
}

/// Render a report keeping only the requested metric keys.
fn filter_report(report: &MetricReport, metrics: &str) -> Result<String> {
    let wanted: Vec<&str> = metrics.split(',').map(str::trim).collect();
    for m in &wanted {
        if !["maxF", "S", "J", "boundaryF"].contains(m) {
            return Err(Error::Usage(format!("unknown metric: {m}")));
        }
    }
    let keep = |line: &&str| wanted.iter().any(|m| line.contains(&format!(".{m}:")));
    let text = report.to_text();
    Ok(text.lines().filter(keep).map(|l| format!("{l}\n")).collect())
}

fn cmd_eval(args: &[String]) -> Result<()> {
    let flags = Flags::parse(
        args,
        &["data", "pred", "ckpt", "metrics", "report", "save-maps", "split", "clip-len", "config", "seed"],
    )?;
    let cfg = effective_config(&flags)?;
    let videos = load_split(&flags, &flags.path("data")?)?;
    let predictions = gather_predictions(&flags, &cfg, &videos)?;
    let report = evaluate_videos(&predictions, &cfg.metrics)?;
    let text = filter_report(&report, flags.get("metrics").unwrap_or("maxF,S,J,boundaryF"))?;
    print!("{text}");
    if let Some(path) = flags.get("report") {
        std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn cmd_plot_pr(args: &[String]) -> Result<()> {
    let flags = Flags::parse(
        args,
        &["data", "pred", "ckpt", "out", "split", "clip-len", "config", "seed"],
    )?;
    let cfg = effective_config(&flags)?;
    let videos = load_split(&flags, &flags.path("data")?)?;
    let predictions = gather_predictions(&flags, &cfg, &videos)?;
    let pairs: Vec<(&Tensor, &BinaryMask)> = predictions
        .iter()
        .flat_map(|(_, v)| v.iter().map(|(p, g)| (p, g)))
        .collect();
    let curve = pr_curve(&pairs, &cfg.metrics)?;
    let out = flags.path("out")?;
    std::fs::write(&out, curve.to_csv()).map_err(|e| Error::io(&out, e))?;
    println!(
        "wrote {}-row PR curve (pooled max F {:.6}) to {}",
        curve.points.len(),
        max_f_measure(&curve, &cfg.metrics),
        out.display()
    );
    Ok(())
}
