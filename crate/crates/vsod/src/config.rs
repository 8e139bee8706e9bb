//! Plain-text configuration.
//!
//! Files are `key = value` lines with `#` comments; keys are dotted paths
//! (`train.lr_pretrain = 1e-4`, `backbone.stage_channels = 8,16,32,64,64`).
//! Values from a file override built-in defaults; command-line flags
//! override both. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::pseudo::AnnotationSchedule;
use crate::spatial::SpatialConfig;
use crate::synth::{MotionModel, ShapeKind, SynthSpec};
use crate::temporal::{RecurrentDepth, TemporalConfig};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Default)]
pub struct AppConfig {
    pub spatial: SpatialConfig,
    pub temporal: TemporalConfig,
    pub train: TrainConfig,
    pub metrics: MetricsConfig,
    pub synth: SynthSpec,
}

impl AppConfig {
    pub fn validate(&self) -> Result<()> {
        self.spatial.validate()?;
        self.train.validate()?;
        self.metrics.validate()?;
        self.synth.validate()
    }

    pub fn load(path: &Path) -> Result<AppConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = AppConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Set one dotted key. Used by both file parsing and CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what}: {value}"));
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|_| bad("integer"));
        let parse_u64 = |v: &str| v.parse::<u64>().map_err(|_| bad("integer"));
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|_| bad("number"));
        let parse_bool = |v: &str| match v {
            "true" | "on" | "1" => Ok(true),
            "false" | "off" | "0" => Ok(false),
            _ => Err(bad("boolean")),
        };
        let parse_list = |v: &str| -> Result<Vec<usize>> {
            v.split(',').map(|s| s.trim().parse::<usize>().map_err(|_| bad("integer list"))).collect()
        };
        match key {
            "backbone.stage_channels" => {
                let list = parse_list(value)?;
                if list.len() != 5 {
                    return Err(bad("five stage channels"));
                }
                self.spatial.backbone.stage_channels = [list[0], list[1], list[2], list[3], list[4]];
            }
            "backbone.stage_blocks" => {
                let list = parse_list(value)?;
                if list.len() != 5 {
                    return Err(bad("five stage block counts"));
                }
                self.spatial.backbone.stage_blocks = [list[0], list[1], list[2], list[3], list[4]];
            }
            "backbone.final_stage_dilation" => {
                self.spatial.backbone.final_stage_dilation = parse_usize(value)?
            }
            "backbone.aspp_rates" => self.spatial.backbone.aspp_rates = parse_list(value)?,
            "backbone.aspp_out_channels" => {
                self.spatial.backbone.aspp_out_channels = parse_usize(value)?
            }
            "backbone.global_pool_branch" => {
                self.spatial.backbone.global_pool_branch = parse_bool(value)?
            }
            "classifier.skip_out_channels" => {
                self.spatial.classifier.skip_out_channels = parse_usize(value)?
            }
            "classifier.refine_channels" => {
                self.spatial.classifier.refine_channels = parse_usize(value)?
            }
            "temporal.first_nonlocal" => self.temporal.first_nonlocal = parse_bool(value)?,
            "temporal.recurrent" => self.temporal.recurrent = parse_bool(value)?,
            "temporal.second_nonlocal" => self.temporal.second_nonlocal = parse_bool(value)?,
            "temporal.gru_bias" => self.temporal.gru_bias = parse_bool(value)?,
            "temporal.recurrent_depth" => {
                self.temporal.recurrent_depth = match value {
                    "single" => RecurrentDepth::Single,
                    "deep" => RecurrentDepth::Deep,
                    _ => return Err(bad("recurrent depth (single|deep)")),
                }
            }
            "train.clip_len" => self.train.clip_len = parse_usize(value)?,
            "train.input_height" => self.train.input_size.0 = parse_usize(value)?,
            "train.input_width" => self.train.input_size.1 = parse_usize(value)?,
            "train.lr_pretrain" => self.train.lr_pretrain = parse_f64(value)?,
            "train.lr_finetune" => self.train.lr_finetune = parse_f64(value)?,
            "train.pretrain_steps" => self.train.pretrain_steps = parse_usize(value)?,
            "train.fgplg_steps" => self.train.fgplg_steps = parse_usize(value)?,
            "train.video_steps" => self.train.video_steps = parse_usize(value)?,
            "train.seed" => self.train.seed = parse_u64(value)?,
            "train.interval" => self.train.schedule.interval = parse_usize(value)?,
            "train.per_interval" => self.train.schedule.per_interval = parse_usize(value)?,
            "train.adam_beta1" => self.train.adam_beta1 = parse_f64(value)?,
            "train.adam_beta2" => self.train.adam_beta2 = parse_f64(value)?,
            "train.adam_eps" => self.train.adam_eps = parse_f64(value)?,
            "metrics.beta_sq" => self.metrics.beta_sq = parse_f64(value)?,
            "metrics.s_alpha" => self.metrics.s_alpha = parse_f64(value)?,
            "metrics.num_thresholds" => self.metrics.num_thresholds = parse_usize(value)?,
            "metrics.boundary_tolerance" => self.metrics.boundary_tolerance = parse_f64(value)?,
            "metrics.gt_binarize_threshold" => {
                self.metrics.gt_binarize_threshold = parse_f64(value)?
            }
            "metrics.per_frame_f" => self.metrics.per_frame_f = parse_bool(value)?,
            "synth.videos" => self.synth.num_videos = parse_usize(value)?,
            "synth.frames" => self.synth.frames_per_video = parse_usize(value)?,
            "synth.height" => self.synth.height = parse_usize(value)?,
            "synth.width" => self.synth.width = parse_usize(value)?,
            "synth.shapes" => {
                let mut kinds = Vec::new();
                for item in value.split(',') {
                    kinds.push(match item.trim() {
                        "disk" => ShapeKind::Disk,
                        "rect" | "rectangle" => ShapeKind::Rectangle,
                        other => return Err(Error::Config(format!("unknown shape: {other}"))),
                    });
                }
                self.synth.shape_kinds = kinds;
            }
            "synth.motion" => {
                self.synth.motion = match value {
                    "const" | "constant" => MotionModel::ConstantVelocity,
                    "sin" | "sinusoidal" => MotionModel::Sinusoidal,
                    _ => return Err(bad("motion model (const|sin)")),
                }
            }
            "synth.distractor" => self.synth.distractor = parse_bool(value)?,
            "synth.contrast" => self.synth.contrast = parse_f64(value)?,
            "synth.subpixel" => self.synth.subpixel = parse_bool(value)?,
            "synth.seed" => self.synth.seed = parse_u64(value)?,
            other => return Err(Error::Config(format!("unknown configuration key: {other}"))),
        }
        Ok(())
    }

    /// Canonical dump: every key in a fixed order. Input to the digest.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let b = &self.spatial.backbone;
        let join = |xs: &[usize]| {
            xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(s, "backbone.stage_channels = {}", join(&b.stage_channels));
        let _ = writeln!(s, "backbone.stage_blocks = {}", join(&b.stage_blocks));
        let _ = writeln!(s, "backbone.final_stage_dilation = {}", b.final_stage_dilation);
        let _ = writeln!(s, "backbone.aspp_rates = {}", join(&b.aspp_rates));
        let _ = writeln!(s, "backbone.aspp_out_channels = {}", b.aspp_out_channels);
        let _ = writeln!(s, "backbone.global_pool_branch = {}", b.global_pool_branch);
        let c = &self.spatial.classifier;
        let _ = writeln!(s, "classifier.skip_out_channels = {}", c.skip_out_channels);
        let _ = writeln!(s, "classifier.refine_channels = {}", c.refine_channels);
        let t = &self.temporal;
        let _ = writeln!(s, "temporal.first_nonlocal = {}", t.first_nonlocal);
        let _ = writeln!(s, "temporal.recurrent = {}", t.recurrent);
        let _ = writeln!(s, "temporal.second_nonlocal = {}", t.second_nonlocal);
        let depth = match t.recurrent_depth {
            RecurrentDepth::Single => "single",
            RecurrentDepth::Deep => "deep",
        };
        let _ = writeln!(s, "temporal.recurrent_depth = {depth}");
        let _ = writeln!(s, "temporal.gru_bias = {}", t.gru_bias);
        let tr = &self.train;
        let _ = writeln!(s, "train.clip_len = {}", tr.clip_len);
        let _ = writeln!(s, "train.input_height = {}", tr.input_size.0);
        let _ = writeln!(s, "train.input_width = {}", tr.input_size.1);
        let _ = writeln!(s, "train.lr_pretrain = {}", tr.lr_pretrain);
        let _ = writeln!(s, "train.lr_finetune = {}", tr.lr_finetune);
        let _ = writeln!(s, "train.pretrain_steps = {}", tr.pretrain_steps);
        let _ = writeln!(s, "train.fgplg_steps = {}", tr.fgplg_steps);
        let _ = writeln!(s, "train.video_steps = {}", tr.video_steps);
        let _ = writeln!(s, "train.seed = {}", tr.seed);
        let _ = writeln!(s, "train.interval = {}", tr.schedule.interval);
        let _ = writeln!(s, "train.per_interval = {}", tr.schedule.per_interval);
        let _ = writeln!(s, "train.adam_beta1 = {}", tr.adam_beta1);
        let _ = writeln!(s, "train.adam_beta2 = {}", tr.adam_beta2);
        let _ = writeln!(s, "train.adam_eps = {}", tr.adam_eps);
        let m = &self.metrics;
        let _ = writeln!(s, "metrics.beta_sq = {}", m.beta_sq);
        let _ = writeln!(s, "metrics.s_alpha = {}", m.s_alpha);
        let _ = writeln!(s, "metrics.num_thresholds = {}", m.num_thresholds);
        let _ = writeln!(s, "metrics.boundary_tolerance = {}", m.boundary_tolerance);
        let _ = writeln!(s, "metrics.gt_binarize_threshold = {}", m.gt_binarize_threshold);
        let _ = writeln!(s, "metrics.per_frame_f = {}", m.per_frame_f);
        let sy = &self.synth;
        let _ = writeln!(s, "synth.videos = {}", sy.num_videos);
        let _ = writeln!(s, "synth.frames = {}", sy.frames_per_video);
        let _ = writeln!(s, "synth.height = {}", sy.height);
        let _ = writeln!(s, "synth.width = {}", sy.width);
        let shapes: Vec<&str> = sy
            .shape_kinds
            .iter()
            .map(|k| match k {
                ShapeKind::Disk => "disk",
                ShapeKind::Rectangle => "rect",
            })
            .collect();
        let _ = writeln!(s, "synth.shapes = {}", shapes.join(","));
        let motion = match sy.motion {
            MotionModel::ConstantVelocity => "const",
            MotionModel::Sinusoidal => "sin",
        };
        let _ = writeln!(s, "synth.motion = {motion}");
        let _ = writeln!(s, "synth.distractor = {}", sy.distractor);
        let _ = writeln!(s, "synth.contrast = {}", sy.contrast);
        let _ = writeln!(s, "synth.subpixel = {}", sy.subpixel);
        let _ = writeln!(s, "synth.seed = {}", sy.seed);
        s
    }

    /// FNV-1a hash of the canonical dump, recorded in checkpoints.
    pub fn digest(&self) -> String {
        let mut hash: u64 = 0xcbf29ce484222325;
        for byte in self.dump().bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        format!("{hash:016x}")
    }

    /// The annotation schedule in force.
    pub fn schedule(&self) -> AnnotationSchedule {
        self.train.schedule
    }
}
