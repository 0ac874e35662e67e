//! First-level model: a memory-augmented convolutional autoencoder used as
//! the generator of a GAN, plus its discriminator.
//!
//! Both networks share the five-stage convolutional trunk
//! `w, 2w, 4w, 8w, 16w` channels (kernel 4, stride 2, padding 1), taking a
//! 320-sample beat down to length 10. The full-size trunk has `w = 32`.

pub(crate) mod train;

pub use train::{scale_scores, EpochLog, Level1, StepLosses, TrainConfig};

use rand::Rng;

use crate::error::{Error, Result};
use crate::memory;
use crate::nn::{self, Forward};
use crate::tensor::ops;
use crate::tensor::{ParamSet, Tape, Var};
use crate::BEAT_LEN;

pub const STAGES: usize = 5;
const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PADDING: usize = 1;
/// Length of the trunk output for a 320-sample input.
pub const TRUNK_LEN: usize = BEAT_LEN >> STAGES;

/// Network sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arch {
    /// Channel count of the first trunk stage.
    pub width: usize,
    /// Latent dimension `d_z`.
    pub latent: usize,
    /// Memory slots `N_Ω`.
    pub slots: usize,
}

impl Arch {
    /// Paper-size networks: 32..512 channels, `d_z = 50`, `N_Ω = 2000`.
    pub const FULL: Arch = Arch { width: 32, latent: 50, slots: 2000 };

    pub fn channels(&self) -> [usize; STAGES] {
        let w = self.width;
        [w, 2 * w, 4 * w, 8 * w, 16 * w]
    }

    /// Channels of the trunk output `h_D`.
    pub fn feature_channels(&self) -> usize {
        16 * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.latent == 0 || self.slots == 0 {
            return Err(Error::Config(format!("network sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Which parts of the generator are active. `{memory: false}` is a plain
/// autoencoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenFlags {
    pub memory: bool,
    /// Hard-shrink the addressing weights.
    pub shrink: bool,
}

fn init_trunk<R: Rng + ?Sized>(p: &mut ParamSet, rng: &mut R, prefix: &str, arch: &Arch) {
    let mut c_in = 1;
    for (i, c) in arch.channels().into_iter().enumerate() {
        nn::init_conv(p, rng, &format!("{prefix}.{i}.conv"), [c, c_in, KERNEL], false);
        nn::init_batch_norm(p, rng, &format!("{prefix}.{i}.bn"), c);
        c_in = c;
    }
}

fn trunk(f: &mut Forward, mut x: Var, prefix: &str) -> Result<Var> {
    for i in 0..STAGES {
        x = f.conv_block(x, &format!("{prefix}.{i}"), STRIDE, PADDING)?;
    }
    Ok(x)
}

fn as_sequence(f: &mut Forward, x: Var) -> Result<Var> {
    let s = f.tape.shape(x).to_vec();
    if s.len() != 2 || s[1] != BEAT_LEN {
        return Err(Error::Rank { op: "beat batch", expected: 2, found: s });
    }
    ops::reshape(f.tape, x, vec![s[0], 1, BEAT_LEN])
}

/// Fresh generator parameters: encoder, memory bank (when enabled) and decoder.
pub fn init_generator<R: Rng + ?Sized>(arch: &Arch, flags: GenFlags, rng: &mut R) -> ParamSet {
    let mut p = ParamSet::new();
    init_trunk(&mut p, rng, "enc", arch);
    let top = arch.feature_channels();
    nn::init_conv(&mut p, rng, "enc.proj", [arch.latent, top, TRUNK_LEN], true);
    if flags.memory {
        p.insert("mem.omega", memory::init_bank(arch.slots, arch.latent, rng), true);
    }
    nn::init_conv_transpose(&mut p, rng, "dec.proj.conv", [arch.latent, top, TRUNK_LEN], false);
    nn::init_batch_norm(&mut p, rng, "dec.proj.bn", top);
    let ch = arch.channels();
    for i in 0..STAGES - 1 {
        let (c_in, c_out) = (ch[STAGES - 1 - i], ch[STAGES - 2 - i]);
        nn::init_conv_transpose(&mut p, rng, &format!("dec.{i}.conv"), [c_in, c_out, KERNEL], false);
        nn::init_batch_norm(&mut p, rng, &format!("dec.{i}.bn"), c_out);
    }
    nn::init_conv_transpose(&mut p, rng, "dec.out", [ch[0], 1, KERNEL], true);
    p
}

/// Handles produced by one generator pass.
#[derive(Clone, Copy, Debug)]
pub struct GenOutput {
    /// Latent code `[batch, latent]`.
    pub z: Var,
    /// Addressing weights `[batch, slots]`, absent without memory.
    pub w: Option<Var>,
    /// Decoder input.
    pub z_hat: Var,
    /// Reconstruction `[batch, 320]`.
    pub x_hat: Var,
}

pub fn encode(f: &mut Forward, x: Var) -> Result<Var> {
    let seq = as_sequence(f, x)?;
    let h = trunk(f, seq, "enc")?;
    let z = f.conv(h, "enc.proj", 1, 0)?;
    let b = f.tape.shape(z)[0];
    let latent = f.tape.shape(z)[1];
    ops::reshape(f.tape, z, vec![b, latent])
}

pub fn decode(f: &mut Forward, z_hat: Var) -> Result<Var> {
    let (b, latent) = (f.tape.shape(z_hat)[0], f.tape.shape(z_hat)[1]);
    let mut y = ops::reshape(f.tape, z_hat, vec![b, latent, 1])?;
    y = f.deconv_block(y, "dec.proj", 1, 0)?;
    for i in 0..STAGES - 1 {
        y = f.deconv_block(y, &format!("dec.{i}"), STRIDE, PADDING)?;
    }
    y = f.conv_transpose(y, "dec.out", STRIDE, PADDING)?;
    let y = ops::tanh(f.tape, y);
    ops::reshape(f.tape, y, vec![b, BEAT_LEN])
}

/// `x [batch, 320]` → encoder → memory → decoder.
pub fn generator_forward(f: &mut Forward, x: Var, flags: GenFlags) -> Result<GenOutput> {
    let z = encode(f, x)?;
    let (w, z_hat) = if flags.memory {
        let omega = f.param("mem.omega")?;
        let w = memory::address(f.tape, z, omega, flags.shrink)?;
        (Some(w), memory::retrieve(f.tape, w, omega)?)
    } else {
        (None, z)
    };
    let x_hat = decode(f, z_hat)?;
    Ok(GenOutput { z, w, z_hat, x_hat })
}

pub fn init_discriminator<R: Rng + ?Sized>(arch: &Arch, rng: &mut R) -> ParamSet {
    let mut p = ParamSet::new();
    init_trunk(&mut p, rng, "disc", arch);
    let w = arch.width;
    nn::init_conv(&mut p, rng, "disc.extra.conv", [w, arch.feature_channels(), KERNEL], false);
    nn::init_batch_norm(&mut p, rng, "disc.extra.bn", w);
    nn::init_linear(&mut p, rng, "disc.fc", 1, w * TRUNK_LEN / 2);
    p
}

/// Discriminator trunk output `h_D [batch, 16w, 10]`, also the level-2
/// feature map.
pub fn disc_features(f: &mut Forward, x: Var) -> Result<Var> {
    let seq = as_sequence(f, x)?;
    trunk(f, seq, "disc")
}

/// Real/fake logits `[batch, 1]` together with `h_D`.
pub fn discriminator_forward(f: &mut Forward, x: Var) -> Result<(Var, Var)> {
    let h = disc_features(f, x)?;
    let e = f.conv_block(h, "disc.extra", STRIDE, PADDING)?;
    let b = f.tape.shape(e)[0];
    let n = f.tape.value(e).len() / b;
    let flat = ops::reshape(f.tape, e, vec![b, n])?;
    let logit = f.linear(flat, "disc.fc")?;
    Ok((logit, h))
}

/// Mean over the batch of `‖x̂ − x‖²`.
pub fn reconstruction_loss(tape: &mut Tape, x: Var, x_hat: Var) -> Result<Var> {
    let d = ops::sub(tape, x_hat, x)?;
    let r = ops::row_sum_squares(tape, d)?;
    Ok(ops::mean(tape, r))
}

/// `(loss_D, loss_G_adv)` from real and fake logits:
/// `−[ln D(x) + ln(1 − D(x̂))]` and `−ln D(x̂)`, each averaged over the batch.
pub fn adversarial_losses(tape: &mut Tape, real: Var, fake: Var) -> Result<(Var, Var)> {
    let neg_real = ops::scale(tape, real, -1.0);
    let a = ops::softplus(tape, neg_real);
    let a = ops::mean(tape, a);
    let b = ops::softplus(tape, fake);
    let b = ops::mean(tape, b);
    let d = ops::add(tape, a, b)?;
    Ok((d, generator_adv_loss(tape, fake)))
}

/// Non-saturating generator term `−ln D(x̂)`, averaged over the batch.
pub fn generator_adv_loss(tape: &mut Tape, fake: Var) -> Var {
    let neg_fake = ops::scale(tape, fake, -1.0);
    let g = ops::softplus(tape, neg_fake);
    ops::mean(tape, g)
}

/// Mean over the batch of `‖h_D(x) − h_D(x̂)‖`.
pub fn feature_matching_loss(tape: &mut Tape, h_real: Var, h_fake: Var) -> Result<Var> {
    let d = ops::sub(tape, h_real, h_fake)?;
    let n = ops::row_l2_norm(tape, d)?;
    Ok(ops::mean(tape, n))
}

/// Maps a standardized beat to the generator's output range: clip to
/// `[−4, 4]`, then divide by 4.
pub fn to_model_input(beat: &[f64]) -> Vec<f64> {
    crate::signal::normalize_beat(beat).iter().map(|v| v.clamp(-4.0, 4.0) / 4.0).collect()
}
