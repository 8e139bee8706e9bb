//! Dataset ingestion and persistence.
//!
//! Layout on disk, one directory per video:
//!
//! ```text
//! root/
//!   splits/<split>.txt        # one video name per line
//!   <video>/frames/00000.png  # zero-padded numeric names
//!   <video>/masks/00000.png   # single-channel; pixel >= 128 is foreground
//!   <video>/motion.txt        # optional synthetic shape states
//! ```
//!
//! Masks may cover only a subset of frames (sparse annotation). The optional
//! `motion.txt` sidecar carries the generator's per-frame shape state so the
//! flow oracle works on reloaded synthetic data; its lines read
//! `index kind cx cy p1 [p2]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::{BinaryMask, ShapeGeometry, ShapeState};
use crate::imageio;
use crate::nn::tensor::Tensor;
use crate::pseudo::FrameLabel;
use crate::spatial::Frame;
use crate::synth::SynthClip;

/// One video's file listing; frames and masks load lazily.
pub struct Video {
    pub name: String,
    frame_paths: Vec<PathBuf>,
    mask_paths: Vec<Option<PathBuf>>,
    states: Option<Vec<ShapeState>>,
}

impl Video {
    pub fn len(&self) -> usize {
        self.frame_paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_paths.is_empty()
    }

    pub fn frame_stem(&self, i: usize) -> String {
        self.frame_paths[i]
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("{i:05}"))
    }

    pub fn frame(&self, i: usize) -> Result<Frame> {
        let path = &self.frame_paths[i];
        let (h, w, data) = imageio::load_rgb(path)?;
        let pixels = Tensor::from_vec(&[3, h, w], data)?;
        match self.states.as_ref().and_then(|s| s.get(i)) {
            Some(state) => Frame::with_shape_state(pixels, *state),
            None => Frame::new(pixels),
        }
    }

    pub fn has_mask(&self, i: usize) -> bool {
        self.mask_paths[i].is_some()
    }

    /// Load the mask for frame i, if present. Pixels at or above 128 are
    /// foreground.
    pub fn mask(&self, i: usize) -> Result<Option<BinaryMask>> {
        let Some(path) = &self.mask_paths[i] else { return Ok(None) };
        Ok(Some(load_mask(path)?))
    }

    /// Mask for frame i, or an error naming the missing path.
    pub fn required_mask(&self, i: usize) -> Result<BinaryMask> {
        match &self.mask_paths[i] {
            Some(path) => load_mask(path),
            None => {
                let expected = self.frame_paths[i]
                    .parent()
                    .and_then(Path::parent)
                    .map(|v| v.join("masks").join(format!("{}.png", self.frame_stem(i))))
                    .unwrap_or_default();
                Err(Error::Data(format!(
                    "missing mask for frame {i} of video {}: {}",
                    self.name,
                    expected.display()
                )))
            }
        }
    }

    /// Eagerly load everything into memory.
    pub fn load_all(&self) -> Result<VideoClipData> {
        let mut frames = Vec::with_capacity(self.len());
        let mut masks = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            frames.push(self.frame(i)?);
            masks.push(self.mask(i)?);
        }
        Ok(VideoClipData { name: self.name.clone(), frames, masks })
    }
}

/// Fully materialized video.
pub struct VideoClipData {
    pub name: String,
    pub frames: Vec<Frame>,
    pub masks: Vec<Option<BinaryMask>>,
}

impl From<&SynthClip> for VideoClipData {
    fn from(clip: &SynthClip) -> Self {
        VideoClipData {
            name: clip.name.clone(),
            frames: clip.frames.clone(),
            masks: clip.masks.iter().cloned().map(Some).collect(),
        }
    }
}

pub struct Dataset {
    pub root: PathBuf,
    pub videos: Vec<Video>,
}

fn load_mask(path: &Path) -> Result<BinaryMask> {
    let (h, w, raw) = imageio::load_gray(path)?;
    let data: Vec<f64> = raw.iter().map(|&v| if v >= 128 { 1.0 } else { 0.0 }).collect();
    BinaryMask::new(Tensor::from_vec(&[1, h, w], data)?)
}

/// Load a soft grayscale map (a saved saliency or pseudo-label) as `[1,H,W]`
/// values in `[0,1]`.
pub fn load_soft_map(path: &Path) -> Result<Tensor> {
    let (h, w, raw) = imageio::load_gray(path)?;
    let data: Vec<f64> = raw.iter().map(|&v| v as f64 / 255.0).collect();
    Tensor::from_vec(&[1, h, w], data)
}

fn numbered_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        if matches!(ext.as_str(), "png" | "jpg" | "jpeg") {
            out.push(path);
        }
    }
    // deterministic regardless of directory iteration order
    out.sort();
    Ok(out)
}

fn parse_motion_file(path: &Path, num_frames: usize) -> Result<Vec<ShapeState>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut states = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| {
            Error::Data(format!("{}:{}: {msg}", path.display(), lineno + 1))
        };
        if fields.len() < 5 {
            return Err(bad("expected: index kind cx cy p1 [p2]"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s}")));
        let cx = num(fields[2])?;
        let cy = num(fields[3])?;
        let geometry = match fields[1] {
            "disk" => ShapeGeometry::Disk { radius: num(fields[4])? },
            "rect" => {
                if fields.len() < 6 {
                    return Err(bad("rect needs two extents"));
                }
                ShapeGeometry::Rect { half_w: num(fields[4])?, half_h: num(fields[5])? }
            }
            other => return Err(bad(&format!("unknown shape kind {other}"))),
        };
        states.push(ShapeState { geometry, center: (cx, cy) });
    }
    if states.len() != num_frames {
        return Err(Error::Data(format!(
            "{}: {} states for {} frames",
            path.display(),
            states.len(),
            num_frames
        )));
    }
    Ok(states)
}

fn motion_line(index: usize, state: &ShapeState) -> String {
    match state.geometry {
        ShapeGeometry::Disk { radius } => {
            format!("{index} disk {} {} {radius}", state.center.0, state.center.1)
        }
        ShapeGeometry::Rect { half_w, half_h } => {
            format!("{index} rect {} {} {half_w} {half_h}", state.center.0, state.center.1)
        }
    }
}

/// Load the videos named by a split manifest, in lexicographic order.
pub fn load_dataset(root: &Path, split: &str) -> Result<Dataset> {
    let manifest = root.join("splits").join(format!("{split}.txt"));
    let text = std::fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut names: Vec<String> =
        text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    names.sort();
    names.dedup();
    if names.is_empty() {
        return Err(Error::Data(format!("split manifest {} lists no videos", manifest.display())));
    }
    let mut videos = Vec::new();
    for name in names {
        let vdir = root.join(&name);
        let frame_paths = numbered_images(&vdir.join("frames"))?;
        if frame_paths.is_empty() {
            return Err(Error::Data(format!("video {name} has no frames")));
        }
        let masks_dir = vdir.join("masks");
        let mut mask_index: BTreeMap<String, PathBuf> = BTreeMap::new();
        if masks_dir.is_dir() {
            for p in numbered_images(&masks_dir)? {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    mask_index.insert(stem.to_string(), p.clone());
                }
            }
        }
        let mask_paths: Vec<Option<PathBuf>> = frame_paths
            .iter()
            .map(|f| {
                f.file_stem()
                    .and_then(|s| s.to_str())
                    .and_then(|stem| mask_index.get(stem).cloned())
            })
            .collect();
        let motion = vdir.join("motion.txt");
        let states = if motion.is_file() {
            Some(parse_motion_file(&motion, frame_paths.len())?)
        } else {
            None
        };
        videos.push(Video { name, frame_paths, mask_paths, states });
    }
    Ok(Dataset { root: root.to_path_buf(), videos })
}

/// Write synthetic clips as a dataset rooted at `root`, with every frame's
/// mask on disk and a `train` split listing all videos.
pub fn write_dataset(root: &Path, clips: &[SynthClip]) -> Result<()> {
    let splits = root.join("splits");
    std::fs::create_dir_all(&splits).map_err(|e| Error::io(&splits, e))?;
    let mut names = Vec::new();
    for clip in clips {
        let vdir = root.join(&clip.name);
        let frames_dir = vdir.join("frames");
        let masks_dir = vdir.join("masks");
        std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
        std::fs::create_dir_all(&masks_dir).map_err(|e| Error::io(&masks_dir, e))?;
        let mut motion = String::new();
        for (i, frame) in clip.frames.iter().enumerate() {
            let (h, w) = (frame.height(), frame.width());
            imageio::save_rgb(&frames_dir.join(format!("{i:05}.png")), h, w, &frame.pixels().data())?;
            imageio::save_gray(
                &masks_dir.join(format!("{i:05}.png")),
                h,
                w,
                &clip.masks[i].values().data(),
            )?;
            motion.push_str(&motion_line(i, &clip.states[i]));
            motion.push('\n');
        }
        let motion_path = vdir.join("motion.txt");
        std::fs::write(&motion_path, motion).map_err(|e| Error::io(&motion_path, e))?;
        names.push(clip.name.clone());
    }
    let manifest = splits.join("train.txt");
    std::fs::write(&manifest, names.join("\n") + "\n").map_err(|e| Error::io(&manifest, e))
}

/// One manifest row: frame index, its role, and the backing file (relative
/// path) or `-` when unlabeled.
pub struct PlanEntry {
    pub index: usize,
    pub label: FrameLabel,
    pub source: Option<String>,
}

/// Write a per-video plan manifest: `index kind path`.
pub fn write_plan_manifest(path: &Path, entries: &[PlanEntry]) -> Result<()> {
    let mut text = String::new();
    for e in entries {
        text.push_str(&format!(
            "{} {} {}\n",
            e.index,
            e.label.as_str(),
            e.source.as_deref().unwrap_or("-")
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_plan_manifest(path: &Path) -> Result<Vec<PlanEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Data(format!(
                "{}:{}: expected `index kind path`",
                path.display(),
                lineno + 1
            )));
        }
        let index = fields[0].parse::<usize>().map_err(|_| {
            Error::Data(format!("{}:{}: bad index {}", path.display(), lineno + 1, fields[0]))
        })?;
        let label = FrameLabel::parse(fields[1])?;
        let source = if fields[2] == "-" { None } else { Some(fields[2].to_string()) };
        out.push(PlanEntry { index, label, source });
    }
    Ok(out)
}

/// Every pseudo entry must have its file on disk, and every pseudo file must
/// be listed; errors name the offender.
pub fn check_manifest_consistency(manifest_dir: &Path, entries: &[PlanEntry]) -> Result<()> {
    let mut listed = Vec::new();
    for e in entries {
        if e.label == FrameLabel::Pseudo {
            let Some(src) = &e.source else {
                return Err(Error::Data(format!(
                    "pseudo entry {} has no source path",
                    e.index
                )));
            };
            let path = manifest_dir.join(src);
            if !path.is_file() {
                return Err(Error::Data(format!(
                    "pseudo label file missing: {}",
                    path.display()
                )));
            }
            listed.push(path);
        }
    }
    let entries_on_disk = std::fs::read_dir(manifest_dir).map_err(|e| Error::io(manifest_dir, e))?;
    for entry in entries_on_disk {
        let entry = entry.map_err(|e| Error::io(manifest_dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png")
            && !listed.iter().any(|l| l == &path)
        {
            return Err(Error::Data(format!(
                "pseudo label file not in manifest: {}",
                path.display()
            )));
        }
    }
    Ok(())
}

/// Save saliency maps as 8-bit grayscale images named after their frames.
pub fn save_outputs(dir: &Path, maps: &[(String, usize, usize, Vec<f64>)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (stem, h, w, values) in maps {
        imageio::save_gray(&dir.join(format!("{stem}.png")), *h, *w, values)?;
    }
    Ok(())
}
