//! Non-locally enhanced recurrent temporal module and the full video
//! network.
//!
//! Per-frame backbone features are stacked into a clip, refined by
//! (optionally) a non-local block, a convolutional GRU over time, and a
//! second non-local block, then decoded per frame by the shared spatial
//! classifier.

use crate::error::{Error, Result};
use crate::nn::conv::{conv2d, ConvParams};
use crate::nn::ops;
use crate::nn::params::{Init, ParamRegistry};
use crate::nn::tensor::Tensor;
use crate::rng::Rng;
use crate::spatial::{Frame, SaliencyMap, SpatialConfig, SpatialNet};

/// Per-frame feature maps stacked in time order: `[T,C,h,w]`.
#[derive(Clone)]
pub struct ClipFeatures {
    tensor: Tensor,
}

impl ClipFeatures {
    pub fn new(tensor: Tensor) -> Result<ClipFeatures> {
        let sh = tensor.shape();
        if sh.len() != 4 || sh[0] == 0 {
            return Err(Error::Shape(format!(
                "clip features must be [T,C,h,w] with T >= 1, got {sh:?}"
            )));
        }
        Ok(ClipFeatures { tensor })
    }

    pub fn from_frames(frames: &[Tensor]) -> Result<ClipFeatures> {
        let refs: Vec<&Tensor> = frames.iter().collect();
        ClipFeatures::new(ops::stack_frames(&refs)?)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn len(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn frame(&self, t: usize) -> Result<Tensor> {
        ops::index_frame(&self.tensor, t)
    }
}

/// Time direction of a recurrent sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// The six 3x3 convolutions of one ConvGRU cell. Biases are omitted by
/// default and available behind a switch.
pub struct ConvGruParams {
    pub w_xz: ConvParams,
    pub w_hz: ConvParams,
    pub w_xr: ConvParams,
    pub w_hr: ConvParams,
    pub w_xh: ConvParams,
    pub w_hh: ConvParams,
    pub hidden_channels: usize,
}

impl ConvGruParams {
    pub fn create(
        reg: &mut ParamRegistry,
        name: &str,
        in_ch: usize,
        hidden_ch: usize,
        with_bias: bool,
        rng: &mut Rng,
    ) -> Result<ConvGruParams> {
        let conv = |reg: &mut ParamRegistry, tag: &str, ic: usize, rng: &mut Rng| {
            ConvParams::create(
                reg,
                &format!("{name}.{tag}"),
                ic,
                hidden_ch,
                3,
                1,
                1,
                with_bias,
                Init::FanInUniform,
                rng,
            )
        };
        Ok(ConvGruParams {
            w_xz: conv(reg, "w_xz", in_ch, rng)?,
            w_hz: conv(reg, "w_hz", hidden_ch, rng)?,
            w_xr: conv(reg, "w_xr", in_ch, rng)?,
            w_hr: conv(reg, "w_hr", hidden_ch, rng)?,
            w_xh: conv(reg, "w_xh", in_ch, rng)?,
            w_hh: conv(reg, "w_hh", hidden_ch, rng)?,
            hidden_channels: hidden_ch,
        })
    }
}

/// One gated recurrence step:
/// Z = σ(Wxz*x + Whz*h), R = σ(Wxr*x + Whr*h),
/// H' = tanh(Wxh*x + R ∘ (Whh*h)), h' = (1-Z) ∘ H' + Z ∘ h.
pub fn convgru_cell(x: &Tensor, h_prev: &Tensor, p: &ConvGruParams) -> Result<Tensor> {
    let z = ops::sigmoid(&ops::add(&conv2d(x, &p.w_xz)?, &conv2d(h_prev, &p.w_hz)?)?);
    let r = ops::sigmoid(&ops::add(&conv2d(x, &p.w_xr)?, &conv2d(h_prev, &p.w_hr)?)?);
    let candidate = ops::tanh(&ops::add(
        &conv2d(x, &p.w_xh)?,
        &ops::mul(&r, &conv2d(h_prev, &p.w_hh)?)?,
    )?);
    ops::add(&ops::mul(&ops::ones_minus(&z), &candidate)?, &ops::mul(&z, h_prev)?)
}

/// Unrolled recurrence over a clip with an all-zero initial state. The
/// returned hidden states are in original time order regardless of sweep
/// direction.
pub fn convgru_forward(
    seq: &ClipFeatures,
    direction: Direction,
    p: &ConvGruParams,
) -> Result<Vec<Tensor>> {
    let t_len = seq.len();
    let sh = seq.tensor().shape();
    let (h, w) = (sh[2], sh[3]);
    let mut hidden = Tensor::zeros(&[p.hidden_channels, h, w]);
    let mut out: Vec<Option<Tensor>> = vec![None; t_len];
    let order: Vec<usize> = match direction {
        Direction::Forward => (0..t_len).collect(),
        Direction::Backward => (0..t_len).rev().collect(),
    };
    for t in order {
        let x = seq.frame(t)?;
        hidden = convgru_cell(&x, &hidden, p)?;
        out[t] = Some(hidden.clone());
    }
    Ok(out.into_iter().map(|o| o.expect("every step visited")).collect())
}

/// Deeper bidirectional ConvGRU: a forward sweep over the inputs, a backward
/// sweep over the forward hidden states, and a tanh fusion of the two.
pub struct BidirConvGru {
    pub fwd: ConvGruParams,
    pub bwd: ConvGruParams,
    pub fuse_f: ConvParams,
    pub fuse_b: ConvParams,
}

impl BidirConvGru {
    pub fn create(
        reg: &mut ParamRegistry,
        name: &str,
        channels: usize,
        with_bias: bool,
        rng: &mut Rng,
    ) -> Result<BidirConvGru> {
        Ok(BidirConvGru {
            fwd: ConvGruParams::create(reg, &format!("{name}.fwd"), channels, channels, with_bias, rng)?,
            bwd: ConvGruParams::create(reg, &format!("{name}.bwd"), channels, channels, with_bias, rng)?,
            fuse_f: ConvParams::create(
                reg,
                &format!("{name}.fuse_f"),
                channels,
                channels,
                3,
                1,
                1,
                with_bias,
                Init::FanInUniform,
                rng,
            )?,
            fuse_b: ConvParams::create(
                reg,
                &format!("{name}.fuse_b"),
                channels,
                channels,
                3,
                1,
                1,
                with_bias,
                Init::FanInUniform,
                rng,
            )?,
        })
    }

    pub fn forward(&self, seq: &ClipFeatures) -> Result<ClipFeatures> {
        let h_f = convgru_forward(seq, Direction::Forward, &self.fwd)?;
        // the backward sweep consumes the forward hidden states
        let forward_clip = ClipFeatures::from_frames(&h_f)?;
        let h_b = convgru_forward(&forward_clip, Direction::Backward, &self.bwd)?;
        let mut fused = Vec::with_capacity(h_f.len());
        for (hf, hb) in h_f.iter().zip(&h_b) {
            fused.push(ops::tanh(&ops::add(
                &conv2d(hf, &self.fuse_f)?,
                &conv2d(hb, &self.fuse_b)?,
            )?));
        }
        ClipFeatures::from_frames(&fused)
    }
}

/// Embedded-Gaussian self-attention over every position of a clip, with a
/// zero-initialized output projection and a residual connection, so a fresh
/// block is exactly the identity.
pub struct NonLocalBlock {
    query: Tensor,
    key: Tensor,
    value: Tensor,
    out: Tensor,
}

impl NonLocalBlock {
    pub fn create(
        reg: &mut ParamRegistry,
        name: &str,
        channels: usize,
        rng: &mut Rng,
    ) -> Result<NonLocalBlock> {
        let reduced = (channels / 2).max(1);
        Ok(NonLocalBlock {
            query: reg.create(&format!("{name}.query"), &[channels, reduced], Init::FanInUniform, rng)?,
            key: reg.create(&format!("{name}.key"), &[channels, reduced], Init::FanInUniform, rng)?,
            value: reg.create(&format!("{name}.value"), &[channels, reduced], Init::FanInUniform, rng)?,
            out: reg.create(&format!("{name}.out"), &[reduced, channels], Init::Zeros, rng)?,
        })
    }

    pub fn forward(&self, clip: &ClipFeatures) -> Result<ClipFeatures> {
        let sh = clip.tensor().shape().to_vec();
        let (t_len, h, w) = (sh[0], sh[2], sh[3]);
        let flat = ops::flatten_positions(clip.tensor())?; // [P, C]
        let q = ops::matmul(&flat, &self.query)?;
        let k = ops::matmul(&flat, &self.key)?;
        let v = ops::matmul(&flat, &self.value)?;
        let logits = ops::matmul(&q, &ops::transpose2d(&k)?)?; // [P, P]
        let attn = ops::softmax(&logits, 1)?;
        let gathered = ops::matmul(&attn, &v)?; // [P, reduced]
        let projected = ops::matmul(&gathered, &self.out)?; // [P, C]
        let residual = ops::unflatten_positions(&projected, t_len, h, w)?;
        ClipFeatures::new(ops::add(clip.tensor(), &residual)?)
    }
}

/// Depth of the recurrent submodule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrentDepth {
    /// A single forward ConvGRU.
    Single,
    /// The deeper bidirectional arrangement.
    Deep,
}

/// Submodule switches covering the ablation grid: everything off is the
/// pure spatial model; the full arrangement is non-local, deep bidirectional
/// GRU, non-local.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalConfig {
    pub first_nonlocal: bool,
    pub recurrent: bool,
    pub second_nonlocal: bool,
    pub recurrent_depth: RecurrentDepth,
    pub gru_bias: bool,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig {
            first_nonlocal: true,
            recurrent: true,
            second_nonlocal: true,
            recurrent_depth: RecurrentDepth::Deep,
            gru_bias: false,
        }
    }
}

impl TemporalConfig {
    /// Every submodule disabled: features pass through untouched.
    pub fn disabled() -> TemporalConfig {
        TemporalConfig {
            first_nonlocal: false,
            recurrent: false,
            second_nonlocal: false,
            recurrent_depth: RecurrentDepth::Deep,
            gru_bias: false,
        }
    }
}

#[allow(clippy::large_enum_variant)]
enum Recurrent {
    Single(ConvGruParams),
    Deep(BidirConvGru),
}

/// The assembled temporal module. Disabled submodules are identities.
pub struct TemporalModule {
    pub cfg: TemporalConfig,
    first: Option<NonLocalBlock>,
    recurrent: Option<Recurrent>,
    second: Option<NonLocalBlock>,
}

impl TemporalModule {
    pub fn new(
        cfg: &TemporalConfig,
        channels: usize,
        reg: &mut ParamRegistry,
        rng: &mut Rng,
    ) -> Result<TemporalModule> {
        let first = if cfg.first_nonlocal {
            Some(NonLocalBlock::create(reg, "temporal.nl1", channels, rng)?)
        } else {
            None
        };
        let recurrent = if cfg.recurrent {
            Some(match cfg.recurrent_depth {
                RecurrentDepth::Single => Recurrent::Single(ConvGruParams::create(
                    reg,
                    "temporal.gru",
                    channels,
                    channels,
                    cfg.gru_bias,
                    rng,
                )?),
                RecurrentDepth::Deep => Recurrent::Deep(BidirConvGru::create(
                    reg,
                    "temporal.gru",
                    channels,
                    cfg.gru_bias,
                    rng,
                )?),
            })
        } else {
            None
        };
        let second = if cfg.second_nonlocal {
            Some(NonLocalBlock::create(reg, "temporal.nl2", channels, rng)?)
        } else {
            None
        };
        Ok(TemporalModule { cfg: *cfg, first, recurrent, second })
    }

    pub fn forward(&self, clip: &ClipFeatures) -> Result<ClipFeatures> {
        let mut x = clip.clone();
        if let Some(nl) = &self.first {
            x = nl.forward(&x)?;
        }
        match &self.recurrent {
            Some(Recurrent::Single(p)) => {
                let hidden = convgru_forward(&x, Direction::Forward, p)?;
                x = ClipFeatures::from_frames(&hidden)?;
            }
            Some(Recurrent::Deep(gru)) => {
                x = gru.forward(&x)?;
            }
            None => {}
        }
        if let Some(nl) = &self.second {
            x = nl.forward(&x)?;
        }
        Ok(x)
    }
}

/// Spatial network plus temporal module: the full video model.
pub struct VideoNet {
    pub spatial: SpatialNet,
    pub temporal: TemporalModule,
}

impl VideoNet {
    pub fn new(
        spatial_cfg: &SpatialConfig,
        temporal_cfg: &TemporalConfig,
        reg: &mut ParamRegistry,
        rng: &mut Rng,
    ) -> Result<VideoNet> {
        let spatial = SpatialNet::new(spatial_cfg, reg, rng)?;
        let temporal =
            TemporalModule::new(temporal_cfg, spatial_cfg.backbone.aspp_out_channels, reg, rng)?;
        Ok(VideoNet { spatial, temporal })
    }

    /// Per-frame features, temporal refinement across the clip, then
    /// per-frame decoding with the shared classifier.
    pub fn video_forward(&self, frames: &[Frame]) -> Result<Vec<SaliencyMap>> {
        if frames.is_empty() {
            return Err(Error::Shape("video_forward: empty clip".into()));
        }
        let (h, w) = (frames[0].height(), frames[0].width());
        for f in frames {
            if f.height() != h || f.width() != w {
                return Err(Error::Shape(format!(
                    "video_forward: inconsistent frame sizes {}x{} vs {h}x{w}",
                    f.height(),
                    f.width()
                )));
            }
        }
        let mut aspp_frames = Vec::with_capacity(frames.len());
        let mut skips = Vec::with_capacity(frames.len());
        for f in frames {
            let feats = self.spatial.extract_features(f.pixels())?;
            aspp_frames.push(feats.aspp);
            skips.push(feats.skips);
        }
        let clip = ClipFeatures::from_frames(&aspp_frames)?;
        let refined = self.temporal.forward(&clip)?;
        let mut maps = Vec::with_capacity(frames.len());
        for (t, frame_skips) in skips.into_iter().enumerate() {
            let feats =
                crate::spatial::Features { aspp: refined.frame(t)?, skips: frame_skips };
            maps.push(self.spatial.segment(&feats, h, w)?);
        }
        Ok(maps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    fn gru_params(in_ch: usize, hidden: usize, with_bias: bool, seed: u64) -> ConvGruParams {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(seed);
        ConvGruParams::create(&mut reg, "g", in_ch, hidden, with_bias, &mut rng).unwrap()
    }

    fn zero_gru_params(ch: usize) -> ConvGruParams {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(0);
        let p = ConvGruParams::create(&mut reg, "g", ch, ch, false, &mut rng).unwrap();
        for (_, t) in reg.iter() {
            t.data_mut().fill(0.0);
        }
        p
    }

    #[test]
    fn nonlocal_is_identity_at_init() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(3);
        let nl = NonLocalBlock::create(&mut reg, "nl", 4, &mut rng).unwrap();
        let clip = ClipFeatures::new(rand_tensor(&[2, 4, 3, 3], 5)).unwrap();
        let out = nl.forward(&clip).unwrap();
        assert_eq!(out.tensor().to_vec(), clip.tensor().to_vec());
    }

    #[test]
    fn nonlocal_single_position_attends_to_itself() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(7);
        let nl = NonLocalBlock::create(&mut reg, "nl", 2, &mut rng).unwrap();
        // make the output projection nonzero so the branch contributes
        reg.get("nl.out").unwrap().data_mut().copy_from_slice(&[0.3, -0.2]);
        let x = Tensor::from_vec(&[1, 2, 1, 1], vec![0.7, -0.4]).unwrap();
        let out = nl.forward(&ClipFeatures::new(x.clone()).unwrap()).unwrap();
        // softmax over one position is 1, so out = x + Wo^T (Wv^T x)
        let wv = reg.get("nl.value").unwrap().to_vec(); // [2,1]
        let v = wv[0] * 0.7 + wv[1] * -0.4;
        let want = [0.7 + 0.3 * v, -0.4 + (-0.2) * v];
        let got = out.tensor().to_vec();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-14, "{g} vs {w}");
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn nonlocal_is_permutation_equivariant_over_positions() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(11);
        let nl = NonLocalBlock::create(&mut reg, "nl", 4, &mut rng).unwrap();
        reg.get("nl.out")
            .unwrap()
            .data_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = 0.1 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 });

        let (t_len, c, h, w) = (2usize, 4usize, 3usize, 3usize);
        let positions = t_len * h * w;
        let x = rand_tensor(&[t_len, c, h, w], 13);
        // fixed permutation of the flattened position axis
        let mut perm: Vec<usize> = (0..positions).collect();
        let mut prng = Rng::new(17);
        prng.shuffle(&mut perm);

        let read = |data: &[f64], p: usize, ci: usize| {
            let (t, s) = (p / (h * w), p % (h * w));
            data[(t * c + ci) * h * w + s]
        };
        let xd = x.to_vec();
        let mut permuted = vec![0.0; xd.len()];
        for p in 0..positions {
            for ci in 0..c {
                let (t, s) = (p / (h * w), p % (h * w));
                permuted[(t * c + ci) * h * w + s] = read(&xd, perm[p], ci);
            }
        }
        let base = nl.forward(&ClipFeatures::new(x).unwrap()).unwrap();
        let shuffled = nl
            .forward(&ClipFeatures::new(Tensor::from_vec(&[t_len, c, h, w], permuted).unwrap()).unwrap())
            .unwrap();
        let bd = base.tensor().to_vec();
        let sd = shuffled.tensor().to_vec();
        for p in 0..positions {
            for ci in 0..c {
                let a = read(&sd, p, ci);
                let b = read(&bd, perm[p], ci);
                assert!((a - b).abs() < 1e-12, "position {p} channel {ci}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_gru_with_zero_state_stays_zero() {
        let p = zero_gru_params(3);
        let x = rand_tensor(&[3, 4, 4], 19);
        let h = Tensor::zeros(&[3, 4, 4]);
        let out = convgru_cell(&x, &h, &p).unwrap();
        assert!(out.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_gru_halves_hidden_state_exactly() {
        // gates sit at 0.5 and the candidate at 0, so h' = 0.5 h
        let p = zero_gru_params(2);
        let x = Tensor::zeros(&[2, 3, 3]);
        let h = rand_tensor(&[2, 3, 3], 23);
        let out = convgru_cell(&x, &h, &p).unwrap();
        let hv = h.to_vec();
        for (o, hv) in out.to_vec().iter().zip(hv) {
            assert_eq!(*o, 0.5 * hv);
        }
    }

    #[test]
    fn saturated_update_gate_preserves_memory() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(0);
        let p = ConvGruParams::create(&mut reg, "g", 2, 2, true, &mut rng).unwrap();
        for (_, t) in reg.iter() {
            t.data_mut().fill(0.0);
        }
        // large positive bias on the hidden-to-update convolution drives Z to 1
        reg.get("g.w_hz.bias").unwrap().data_mut().fill(30.0);
        let x = rand_tensor(&[2, 3, 3], 29);
        let h = Tensor::full(&[2, 3, 3], 0.8);
        let out = convgru_cell(&x, &h, &p).unwrap();
        for v in out.to_vec() {
            assert!((v - 0.8).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn single_step_equals_cell_with_zero_state() {
        let p = gru_params(3, 3, false, 31);
        let x = rand_tensor(&[3, 4, 4], 37);
        let clip = ClipFeatures::from_frames(std::slice::from_ref(&x)).unwrap();
        let seq = convgru_forward(&clip, Direction::Forward, &p).unwrap();
        assert_eq!(seq.len(), 1);
        let direct = convgru_cell(&x, &Tensor::zeros(&[3, 4, 4]), &p).unwrap();
        assert_eq!(seq[0].to_vec(), direct.to_vec());
    }

    #[test]
    fn backward_sweep_equals_forward_on_reversed_input() {
        let p = gru_params(2, 2, false, 41);
        let frames: Vec<Tensor> = (0..4).map(|i| rand_tensor(&[2, 3, 3], 50 + i)).collect();
        let clip = ClipFeatures::from_frames(&frames).unwrap();
        let rev_frames: Vec<Tensor> = frames.iter().rev().cloned().collect();
        let rev_clip = ClipFeatures::from_frames(&rev_frames).unwrap();
        let back = convgru_forward(&clip, Direction::Backward, &p).unwrap();
        let fwd_on_rev = convgru_forward(&rev_clip, Direction::Forward, &p).unwrap();
        for (t, b) in back.iter().enumerate() {
            assert_eq!(b.to_vec(), fwd_on_rev[3 - t].to_vec(), "step {t}");
        }
    }

    #[test]
    fn zero_weights_propagate_zero_hidden_sequence() {
        let p = zero_gru_params(2);
        let frames: Vec<Tensor> = (0..3).map(|i| rand_tensor(&[2, 3, 3], 60 + i)).collect();
        let clip = ClipFeatures::from_frames(&frames).unwrap();
        for hidden in convgru_forward(&clip, Direction::Forward, &p).unwrap() {
            assert!(hidden.to_vec().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bidirectional_zero_weights_give_zero_output() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(1);
        let gru = BidirConvGru::create(&mut reg, "g", 2, false, &mut rng).unwrap();
        for (_, t) in reg.iter() {
            t.data_mut().fill(0.0);
        }
        let clip = ClipFeatures::new(rand_tensor(&[3, 2, 3, 3], 70)).unwrap();
        let out = gru.forward(&clip).unwrap();
        assert!(out.tensor().to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bidirectional_output_is_in_tanh_range() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(2);
        let gru = BidirConvGru::create(&mut reg, "g", 3, false, &mut rng).unwrap();
        let clip = ClipFeatures::new(rand_tensor(&[4, 3, 4, 4], 80)).unwrap();
        let out = gru.forward(&clip).unwrap();
        assert!(out.tensor().to_vec().iter().all(|&v| v > -1.0 && v < 1.0));
    }

    #[test]
    fn bidirectional_single_step_matches_hand_composition() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(3);
        let gru = BidirConvGru::create(&mut reg, "g", 2, false, &mut rng).unwrap();
        let x = rand_tensor(&[2, 3, 3], 90);
        let clip = ClipFeatures::from_frames(std::slice::from_ref(&x)).unwrap();
        let out = gru.forward(&clip).unwrap();
        // hand-composed: hf from x, hb from hf, fused
        let zero = Tensor::zeros(&[2, 3, 3]);
        let hf = convgru_cell(&x, &zero, &gru.fwd).unwrap();
        let hb = convgru_cell(&hf, &zero, &gru.bwd).unwrap();
        let want = ops::tanh(
            &ops::add(&conv2d(&hf, &gru.fuse_f).unwrap(), &conv2d(&hb, &gru.fuse_b).unwrap())
                .unwrap(),
        );
        assert_eq!(out.tensor().to_vec(), want.to_vec());
    }

    #[test]
    fn cell_matches_straight_line_transcription() {
        // independent evaluation with its own convolution loops
        fn brute_conv3x3(x: &[f64], k: &[f64], c_in: usize, c_out: usize, h: usize, w: usize) -> Vec<f64> {
            let mut out = vec![0.0; c_out * h * w];
            for oc in 0..c_out {
                for y in 0..h as isize {
                    for xx in 0..w as isize {
                        let mut acc = 0.0;
                        for ic in 0..c_in {
                            for ky in -1..=1isize {
                                for kx in -1..=1isize {
                                    let (sy, sx) = (y + ky, xx + kx);
                                    if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                        continue;
                                    }
                                    acc += x[(ic * h + sy as usize) * w + sx as usize]
                                        * k[((oc * c_in + ic) * 3 + (ky + 1) as usize) * 3
                                            + (kx + 1) as usize];
                                }
                            }
                        }
                        out[(oc * h + y as usize) * w + xx as usize] = acc;
                    }
                }
            }
            out
        }
        for seed in 0..3u64 {
            let (c, h, w) = (2usize, 3usize, 3usize);
            let p = gru_params(c, c, false, 100 + seed);
            let x = rand_tensor(&[c, h, w], 200 + seed);
            let hp = rand_tensor(&[c, h, w], 300 + seed);
            let got = convgru_cell(&x, &hp, &p).unwrap().to_vec();

            let (xv, hv) = (x.to_vec(), hp.to_vec());
            let conv = |inp: &[f64], kp: &ConvParams| {
                brute_conv3x3(inp, &kp.kernel.to_vec(), c, c, h, w)
            };
            let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
            let az = conv(&xv, &p.w_xz);
            let bz = conv(&hv, &p.w_hz);
            let ar = conv(&xv, &p.w_xr);
            let br = conv(&hv, &p.w_hr);
            let ah = conv(&xv, &p.w_xh);
            let bh = conv(&hv, &p.w_hh);
            let mut want = vec![0.0; c * h * w];
            for i in 0..want.len() {
                let z = sig(az[i] + bz[i]);
                let r = sig(ar[i] + br[i]);
                let cand = (ah[i] + r * bh[i]).tanh();
                want[i] = (1.0 - z) * cand + z * hv[i];
            }
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn disabled_module_is_identity() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(4);
        let module = TemporalModule::new(&TemporalConfig::disabled(), 4, &mut reg, &mut rng).unwrap();
        assert_eq!(reg.len(), 0);
        let clip = ClipFeatures::new(rand_tensor(&[3, 4, 2, 2], 99)).unwrap();
        let out = module.forward(&clip).unwrap();
        assert_eq!(out.tensor().to_vec(), clip.tensor().to_vec());
    }

    #[test]
    fn first_nonlocal_only_matches_disabled_at_init() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(5);
        let cfg = TemporalConfig {
            first_nonlocal: true,
            recurrent: false,
            second_nonlocal: false,
            ..TemporalConfig::default()
        };
        let module = TemporalModule::new(&cfg, 4, &mut reg, &mut rng).unwrap();
        let clip = ClipFeatures::new(rand_tensor(&[2, 4, 3, 3], 101)).unwrap();
        let out = module.forward(&clip).unwrap();
        assert_eq!(out.tensor().to_vec(), clip.tensor().to_vec());
    }

    #[test]
    fn full_module_preserves_shape_for_default_clip_length() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(6);
        let module = TemporalModule::new(&TemporalConfig::default(), 4, &mut reg, &mut rng).unwrap();
        let clip = ClipFeatures::new(rand_tensor(&[4, 4, 4, 4], 103)).unwrap();
        let out = module.forward(&clip).unwrap();
        assert_eq!(out.tensor().shape(), clip.tensor().shape());
    }

    #[test]
    fn video_forward_emits_full_resolution_map_per_frame() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(7);
        let net = VideoNet::new(
            &SpatialConfig::default(),
            &TemporalConfig::default(),
            &mut reg,
            &mut rng,
        )
        .unwrap();
        let frames: Vec<Frame> = (0..4)
            .map(|i| {
                Frame::new(Tensor::full(&[3, 64, 64], 0.1 + 0.05 * i as f64)).unwrap()
            })
            .collect();
        let maps = net.video_forward(&frames).unwrap();
        assert_eq!(maps.len(), 4);
        for m in &maps {
            assert_eq!(m.logits().shape(), &[1, 64, 64]);
        }
    }

    #[test]
    fn video_forward_rejects_inconsistent_sizes() {
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(8);
        let net = VideoNet::new(
            &SpatialConfig::default(),
            &TemporalConfig::disabled(),
            &mut reg,
            &mut rng,
        )
        .unwrap();
        let a = Frame::new(Tensor::full(&[3, 64, 64], 0.1)).unwrap();
        let b = Frame::new(Tensor::full(&[3, 32, 32], 0.1)).unwrap();
        assert!(matches!(net.video_forward(&[a, b]), Err(Error::Shape(_))));
    }

    #[test]
    fn duplicated_frame_with_identity_temporal_matches_single_pass() {
        // non-local blocks at init are identities; the recurrent stage is
        // disabled, so each frame decodes exactly like the single-frame path
        let mut reg = ParamRegistry::new();
        let mut rng = Rng::new(9);
        let cfg = TemporalConfig { recurrent: false, ..TemporalConfig::default() };
        let net =
            VideoNet::new(&SpatialConfig::default(), &cfg, &mut reg, &mut rng).unwrap();
        // untrained classifier is all-zero; spice it up so maps vary
        reg.get("classifier.weight")
            .unwrap()
            .data_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = 0.02 * (i as f64 + 1.0));
        let mut frng = Rng::new(500);
        let vals: Vec<f64> = (0..3 * 64 * 64).map(|_| frng.uniform(0.0, 1.0)).collect();
        let frame = Frame::new(Tensor::from_vec(&[3, 64, 64], vals).unwrap()).unwrap();
        let maps = net.video_forward(&[frame.clone(), frame.clone(), frame.clone(), frame.clone()]).unwrap();
        let single = net.spatial.forward_single(&frame).unwrap();
        let want = single.logits().to_vec();
        for m in maps {
            let got = m.logits().to_vec();
            let diff = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            assert!(diff < 1e-12, "max diff {diff}");
        }
    }
}
