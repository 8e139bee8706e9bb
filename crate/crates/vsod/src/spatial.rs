//! Spatial saliency network: a five-stage residual backbone with output
//! stride 16, an atrous spatial pyramid pooling head, and a pixel-wise
//! classifier of three cascaded refinement blocks fed by residual skip
//! connections.

use crate::error::{Error, Result};
use crate::flow::ShapeState;
use crate::nn::conv::{conv2d, ConvParams, Padding};
use crate::nn::ops;
use crate::nn::params::{Init, ParamRegistry};
use crate::nn::resize::bilinear_resize;
use crate::nn::tensor::Tensor;
use crate::rng::Rng;

/// Fixed ratio of input size to the deepest feature map.
pub const OUTPUT_STRIDE: usize = 16;

/// Backbone and ASPP configuration.
#[derive(Debug, Clone)]
pub struct BackboneConfig {
    pub stage_channels: [usize; 5],
    pub stage_blocks: [usize; 5],
    /// Dilation replacing the last stage's downsampling.
    pub final_stage_dilation: usize,
    pub output_stride: usize,
    pub aspp_rates: Vec<usize>,
    pub aspp_out_channels: usize,
    pub global_pool_branch: bool,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            stage_channels: [8, 16, 32, 64, 64],
            stage_blocks: [1, 1, 1, 1, 1],
            final_stage_dilation: 2,
            output_stride: OUTPUT_STRIDE,
            aspp_rates: vec![1, 6, 12, 18],
            aspp_out_channels: 64,
            global_pool_branch: true,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.output_stride != OUTPUT_STRIDE {
            return Err(Error::Config(format!(
                "output_stride must be {OUTPUT_STRIDE}, got {}",
                self.output_stride
            )));
        }
        if self.stage_channels.contains(&0) || self.stage_blocks.contains(&0)
        {
            return Err(Error::Config("stage channels and blocks must be positive".into()));
        }
        if self.final_stage_dilation == 0 {
            return Err(Error::Config("final_stage_dilation must be >= 1".into()));
        }
        if self.aspp_rates.is_empty() {
            return Err(Error::Config("aspp_rates must be nonempty".into()));
        }
        let mut sorted = self.aspp_rates.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.aspp_rates.len() || self.aspp_rates.contains(&0) {
            return Err(Error::Config(format!(
                "aspp_rates must be distinct and >= 1, got {:?}",
                self.aspp_rates
            )));
        }
        if self.aspp_out_channels == 0 {
            return Err(Error::Config("aspp_out_channels must be positive".into()));
        }
        Ok(())
    }
}

/// Pixel-wise classifier configuration.
#[derive(Debug, Clone)]
pub struct ClassifierConfig {
    pub skip_out_channels: usize,
    pub refine_channels: usize,
    pub num_refine_blocks: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        // skip_out_channels must stay below the narrowest tapped stage (8
        // channels in the default backbone)
        ClassifierConfig { skip_out_channels: 6, refine_channels: 32, num_refine_blocks: 3 }
    }
}

impl ClassifierConfig {
    pub fn validate(&self, backbone: &BackboneConfig) -> Result<()> {
        if self.num_refine_blocks != 3 {
            return Err(Error::Config(format!(
                "num_refine_blocks is fixed at 3, got {}",
                self.num_refine_blocks
            )));
        }
        for &m in &backbone.stage_channels[..3] {
            if self.skip_out_channels >= m {
                return Err(Error::Config(format!(
                    "skip_out_channels {} must be < tapped stage channels {m}",
                    self.skip_out_channels
                )));
            }
        }
        if self.refine_channels == 0 {
            return Err(Error::Config("refine_channels must be positive".into()));
        }
        Ok(())
    }
}

/// Full spatial-network configuration. `in_channels` is 3 for RGB frames and
/// 7 for the pseudo-label generator variant.
#[derive(Debug, Clone)]
pub struct SpatialConfig {
    pub in_channels: usize,
    pub backbone: BackboneConfig,
    pub classifier: ClassifierConfig,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        SpatialConfig {
            in_channels: 3,
            backbone: BackboneConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl SpatialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 {
            return Err(Error::Config("in_channels must be positive".into()));
        }
        self.backbone.validate()?;
        self.classifier.validate(&self.backbone)
    }
}

/// One RGB frame in `[0,1]` with dimensions that are multiples of 16.
/// Synthetic frames carry the generator's shape state so the flow oracle can
/// reconstruct exact motion.
#[derive(Clone)]
pub struct Frame {
    pixels: Tensor,
    shape_state: Option<ShapeState>,
}

impl Frame {
    pub fn new(pixels: Tensor) -> Result<Frame> {
        let sh = pixels.shape();
        if sh.len() != 3 || sh[0] != 3 {
            return Err(Error::Shape(format!("frame must be [3,H,W], got {sh:?}")));
        }
        if !sh[1].is_multiple_of(16) || !sh[2].is_multiple_of(16) || sh[1] == 0 || sh[2] == 0 {
            return Err(Error::Shape(format!(
                "frame dimensions must be positive multiples of 16, got {}x{}",
                sh[1], sh[2]
            )));
        }
        if let Some(bad) = pixels.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("frame pixel {bad} outside [0,1]")));
        }
        Ok(Frame { pixels, shape_state: None })
    }

    pub fn with_shape_state(pixels: Tensor, state: ShapeState) -> Result<Frame> {
        let mut f = Frame::new(pixels)?;
        f.shape_state = Some(state);
        Ok(f)
    }

    pub fn pixels(&self) -> &Tensor {
        &self.pixels
    }

    pub fn shape_state(&self) -> Option<&ShapeState> {
        self.shape_state.as_ref()
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[2]
    }
}

/// Per-pixel saliency, stored as pre-sigmoid logits of shape `[1,H,W]`.
/// Losses consume the logits; [`SaliencyMap::probs`] applies the sigmoid.
#[derive(Clone)]
pub struct SaliencyMap {
    logits: Tensor,
}

impl SaliencyMap {
    pub fn from_logits(logits: Tensor) -> Result<SaliencyMap> {
        let sh = logits.shape();
        if sh.len() != 3 || sh[0] != 1 {
            return Err(Error::Shape(format!("saliency map must be [1,H,W], got {sh:?}")));
        }
        Ok(SaliencyMap { logits })
    }

    pub fn logits(&self) -> &Tensor {
        &self.logits
    }

    /// Post-sigmoid probabilities in `[0,1]`.
    pub fn probs(&self) -> Tensor {
        ops::sigmoid(&self.logits)
    }

    pub fn height(&self) -> usize {
        self.logits.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.logits.shape()[2]
    }
}

/// Backbone features handed to the classifier: the ASPP output at stride 16
/// and the three skip taps, deepest first (strides 8, 4, 2).
pub struct Features {
    pub aspp: Tensor,
    pub skips: [Tensor; 3],
}

struct ResBlock {
    conv1: ConvParams,
    conv2: ConvParams,
}

impl ResBlock {
    fn create(
        reg: &mut ParamRegistry,
        name: &str,
        channels: usize,
        dilation: usize,
        rng: &mut Rng,
    ) -> Result<ResBlock> {
        Ok(ResBlock {
            conv1: ConvParams::create(
                reg,
                &format!("{name}.conv1"),
                channels,
                channels,
                3,
                1,
                dilation,
                true,
                Init::FanInUniform,
                rng,
            )?,
            conv2: ConvParams::create(
                reg,
                &format!("{name}.conv2"),
                channels,
                channels,
                3,
                1,
                dilation,
                true,
                Init::FanInUniform,
                rng,
            )?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = ops::relu(&conv2d(x, &self.conv1)?);
        let h = conv2d(&h, &self.conv2)?;
        Ok(ops::relu(&ops::add(x, &h)?))
    }
}

struct Stage {
    entry: ConvParams,
    blocks: Vec<ResBlock>,
}

impl Stage {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = ops::relu(&conv2d(x, &self.entry)?);
        for b in &self.blocks {
            h = b.forward(&h)?;
        }
        Ok(h)
    }
}

/// Atrous spatial pyramid pooling: parallel dilated branches plus an
/// optional image-level context branch, concatenated and projected.
pub struct Aspp {
    branches: Vec<ConvParams>,
    global: Option<ConvParams>,
    project: ConvParams,
    pub out_channels: usize,
}

impl Aspp {
    fn create(
        reg: &mut ParamRegistry,
        name: &str,
        in_ch: usize,
        cfg: &BackboneConfig,
        rng: &mut Rng,
    ) -> Result<Aspp> {
        let out = cfg.aspp_out_channels;
        let mut branches = Vec::new();
        for (i, &rate) in cfg.aspp_rates.iter().enumerate() {
            // rate 1 degenerates to a pointwise conv
            let (ksize, dilation) = if rate == 1 { (1, 1) } else { (3, rate) };
            branches.push(ConvParams::create(
                reg,
                &format!("{name}.branch{i}"),
                in_ch,
                out,
                ksize,
                1,
                dilation,
                true,
                Init::FanInUniform,
                rng,
            )?);
        }
        let global = if cfg.global_pool_branch {
            Some(ConvParams::create(
                reg,
                &format!("{name}.global"),
                in_ch,
                out,
                1,
                1,
                1,
                true,
                Init::FanInUniform,
                rng,
            )?)
        } else {
            None
        };
        let concat_ch = out * (branches.len() + usize::from(global.is_some()));
        let project = ConvParams::create(
            reg,
            &format!("{name}.project"),
            concat_ch,
            out,
            1,
            1,
            1,
            true,
            Init::FanInUniform,
            rng,
        )?;
        Ok(Aspp { branches, global, project, out_channels: out })
    }

    pub fn forward(&self, features: &Tensor) -> Result<Tensor> {
        let sh = features.shape();
        if sh.len() != 3 {
            return Err(Error::Shape(format!("aspp: expected [C,H,W], got {sh:?}")));
        }
        let (h, w) = (sh[1], sh[2]);
        let mut outs = Vec::new();
        for b in &self.branches {
            outs.push(ops::relu(&conv2d(features, b)?));
        }
        if let Some(g) = &self.global {
            let pooled = ops::mean_spatial(features)?;
            let ctx = ops::relu(&conv2d(&pooled, g)?);
            outs.push(ops::broadcast_spatial(&ctx, h, w)?);
        }
        let refs: Vec<&Tensor> = outs.iter().collect();
        let cat = ops::concat_channels(&refs)?;
        Ok(ops::relu(&conv2d(&cat, &self.project)?))
    }
}

/// Residual skip connection layer: a bias-free pointwise projection from M to
/// N channels plus a bottleneck branch whose final convolution starts at
/// zero, so a fresh layer is exactly its projection.
pub struct SkipLayer {
    project: ConvParams,
    reduce: ConvParams,
    mid: ConvParams,
    expand: ConvParams,
}

impl SkipLayer {
    pub fn create(
        reg: &mut ParamRegistry,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        rng: &mut Rng,
    ) -> Result<SkipLayer> {
        if in_ch <= out_ch {
            return Err(Error::Config(format!(
                "residual skip needs in channels M > out channels N, got M={in_ch}, N={out_ch}"
            )));
        }
        let mid_ch = (out_ch / 2).max(1);
        Ok(SkipLayer {
            project: ConvParams::create(
                reg,
                &format!("{name}.project"),
                in_ch,
                out_ch,
                1,
                1,
                1,
                false,
                Init::FanInUniform,
                rng,
            )?,
            reduce: ConvParams::create(
                reg,
                &format!("{name}.reduce"),
                in_ch,
                mid_ch,
                1,
                1,
                1,
                false,
                Init::FanInUniform,
                rng,
            )?,
            mid: ConvParams::create(
                reg,
                &format!("{name}.mid"),
                mid_ch,
                mid_ch,
                3,
                1,
                1,
                false,
                Init::FanInUniform,
                rng,
            )?,
            expand: ConvParams::create(
                reg,
                &format!("{name}.expand"),
                mid_ch,
                out_ch,
                1,
                1,
                1,
                false,
                Init::Zeros,
                rng,
            )?,
        })
    }

    /// The plain projection path alone.
    pub fn projection(&self, low_level: &Tensor) -> Result<Tensor> {
        conv2d(low_level, &self.project)
    }

    pub fn forward(&self, low_level: &Tensor) -> Result<Tensor> {
        let proj = self.projection(low_level)?;
        let b = ops::relu(&conv2d(low_level, &self.reduce)?);
        let b = ops::relu(&conv2d(&b, &self.mid)?);
        let b = conv2d(&b, &self.expand)?;
        ops::add(&proj, &b)
    }
}

/// One refinement step: upsample the bottom-up map to the skip's resolution
/// when needed, concatenate, and fuse with a 3x3 convolution.
pub struct RefineBlock {
    conv: ConvParams,
}

impl RefineBlock {
    fn create(
        reg: &mut ParamRegistry,
        name: &str,
        bottom_ch: usize,
        skip_ch: usize,
        out_ch: usize,
        rng: &mut Rng,
    ) -> Result<RefineBlock> {
        Ok(RefineBlock {
            conv: ConvParams::create(
                reg,
                &format!("{name}.conv"),
                bottom_ch + skip_ch,
                out_ch,
                3,
                1,
                1,
                true,
                Init::FanInUniform,
                rng,
            )?,
        })
    }

    pub fn forward(&self, bottom_up: &Tensor, skip: &Tensor) -> Result<Tensor> {
        let (bh, bw) = (bottom_up.shape()[1], bottom_up.shape()[2]);
        let (sh, sw) = (skip.shape()[1], skip.shape()[2]);
        let up = if (bh, bw) == (sh, sw) {
            bottom_up.clone()
        } else if sh == 2 * bh && sw == 2 * bw {
            bilinear_resize(bottom_up, sh, sw)?
        } else {
            return Err(Error::Shape(format!(
                "refine block: skip {sh}x{sw} is neither equal to nor double the bottom-up {bh}x{bw}"
            )));
        };
        let cat = ops::concat_channels(&[&up, skip])?;
        Ok(ops::relu(&conv2d(&cat, &self.conv)?))
    }
}

/// The spatial network. Forward passes are pure given the parameters.
pub struct SpatialNet {
    pub cfg: SpatialConfig,
    stages: Vec<Stage>,
    aspp: Aspp,
    skips: Vec<SkipLayer>,
    refines: Vec<RefineBlock>,
    classifier: ConvParams,
}

impl SpatialNet {
    /// Build a freshly initialized network, registering parameters in `reg`.
    /// The final classifier layer starts at zero so an untrained network
    /// emits a uniform 0.5 map.
    pub fn new(cfg: &SpatialConfig, reg: &mut ParamRegistry, rng: &mut Rng) -> Result<SpatialNet> {
        cfg.validate()?;
        let bb = &cfg.backbone;
        let mut stages = Vec::new();
        let mut in_ch = cfg.in_channels;
        for (i, (&ch, &nblocks)) in bb.stage_channels.iter().zip(&bb.stage_blocks).enumerate() {
            let last = i == 4;
            let (stride, dilation) = if last { (1, bb.final_stage_dilation) } else { (2, 1) };
            let entry = ConvParams::create(
                reg,
                &format!("backbone.stage{i}.entry"),
                in_ch,
                ch,
                3,
                stride,
                dilation,
                true,
                Init::FanInUniform,
                rng,
            )?;
            let mut blocks = Vec::new();
            for j in 0..nblocks {
                blocks.push(ResBlock::create(
                    reg,
                    &format!("backbone.stage{i}.block{j}"),
                    ch,
                    dilation,
                    rng,
                )?);
            }
            stages.push(Stage { entry, blocks });
            in_ch = ch;
        }
        let aspp = Aspp::create(reg, "aspp", bb.stage_channels[4], bb, rng)?;
        let n = cfg.classifier.skip_out_channels;
        // deepest first: stage 2 (stride 8), stage 1 (stride 4), stage 0 (stride 2)
        let mut skips = Vec::new();
        for (si, stage_idx) in [2usize, 1, 0].iter().enumerate() {
            skips.push(SkipLayer::create(
                reg,
                &format!("skip{si}"),
                bb.stage_channels[*stage_idx],
                n,
                rng,
            )?);
        }
        let rc = cfg.classifier.refine_channels;
        let mut refines = Vec::new();
        let mut bottom = bb.aspp_out_channels;
        for i in 0..cfg.classifier.num_refine_blocks {
            refines.push(RefineBlock::create(reg, &format!("refine{i}"), bottom, n, rc, rng)?);
            bottom = rc;
        }
        let classifier = {
            let kernel = reg.create("classifier.weight", &[1, rc, 1, 1], Init::Zeros, rng)?;
            let bias = reg.create("classifier.bias", &[1], Init::Zeros, rng)?;
            ConvParams::new(kernel, Some(bias), 1, 1, Padding::Same)?
        };
        Ok(SpatialNet { cfg: cfg.clone(), stages, aspp, skips, refines, classifier })
    }

    pub fn aspp_module(&self) -> &Aspp {
        &self.aspp
    }

    pub fn skip_layer(&self, i: usize) -> &SkipLayer {
        &self.skips[i]
    }

    pub fn refine_block(&self, i: usize) -> &RefineBlock {
        &self.refines[i]
    }

    /// Run the backbone and ASPP. Returns the stride-16 context features and
    /// the three skip taps (strides 8, 4, 2 of the input), deepest first.
    pub fn extract_features(&self, pixels: &Tensor) -> Result<Features> {
        let sh = pixels.shape();
        if sh.len() != 3 || sh[0] != self.cfg.in_channels {
            return Err(Error::Shape(format!(
                "extract_features: expected [{},H,W], got {sh:?}",
                self.cfg.in_channels
            )));
        }
        if !sh[1].is_multiple_of(16) || !sh[2].is_multiple_of(16) || sh[1] == 0 || sh[2] == 0 {
            return Err(Error::Shape(format!(
                "extract_features: dimensions must be positive multiples of 16, got {}x{}",
                sh[1], sh[2]
            )));
        }
        let s1 = self.stages[0].forward(pixels)?; // stride 2
        let s2 = self.stages[1].forward(&s1)?; // stride 4
        let s3 = self.stages[2].forward(&s2)?; // stride 8
        let s4 = self.stages[3].forward(&s3)?; // stride 16
        let s5 = self.stages[4].forward(&s4)?; // stride 16, dilated
        let aspp = self.aspp.forward(&s5)?;
        Ok(Features { aspp, skips: [s3, s2, s1] })
    }

    /// Decode features into a full-resolution saliency map for a frame of
    /// size `out_h` x `out_w`.
    pub fn segment(&self, feats: &Features, out_h: usize, out_w: usize) -> Result<SaliencyMap> {
        for (i, (skip, stride)) in feats.skips.iter().zip([8usize, 4, 2]).enumerate() {
            let sh = skip.shape();
            if sh[1] != out_h / stride || sh[2] != out_w / stride {
                return Err(Error::Shape(format!(
                    "segment: skip {i} has shape {sh:?}, expected spatial {}x{} for frame {out_h}x{out_w}",
                    out_h / stride,
                    out_w / stride
                )));
            }
        }
        let mut x = feats.aspp.clone();
        for ((refine, connection), tap) in self.refines.iter().zip(&self.skips).zip(&feats.skips) {
            let skip = connection.forward(tap)?;
            x = refine.forward(&x, &skip)?;
        }
        let logits_half = conv2d(&x, &self.classifier)?;
        let logits = bilinear_resize(&logits_half, out_h, out_w)?;
        SaliencyMap::from_logits(logits)
    }

    /// Full single-frame pass: features then segmentation.
    pub fn forward_single(&self, frame: &Frame) -> Result<SaliencyMap> {
        let feats = self.extract_features(frame.pixels())?;
        self.segment(&feats, frame.height(), frame.width())
    }
}
