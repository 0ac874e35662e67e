use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    adversarial_losses, disc_features, discriminator_forward, feature_matching_loss, generator_adv_loss,
    generator_forward, init_discriminator, init_generator, reconstruction_loss, Arch, GenFlags,
};
use crate::error::{Error, Result};
use crate::memory::{self, DEFAULT_SPARSITY_WEIGHT};
use crate::metrics;
use crate::nn::{self, Forward, Mode};
use crate::tensor::ops;
use crate::tensor::{AdamConfig, Checkpoint, ParamSet, Tape, Tensor, Var};
use crate::BEAT_LEN;

const SCORE_BATCH: usize = 128;

/// Optimizer, schedule, loss weights and ablation switches.
///
/// `{memory: false, adversarial: false}` trains a plain autoencoder,
/// `{memory: true, adversarial: false}` a memory autoencoder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_rec: f64,
    pub lambda_sparse: f64,
    pub lambda_fm: f64,
    pub lambda_adv: f64,
    pub memory: bool,
    pub adversarial: bool,
    pub shrink: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            epochs: 50,
            batch_size: 64,
            lambda_rec: 1.0,
            lambda_sparse: DEFAULT_SPARSITY_WEIGHT,
            lambda_fm: 1.0,
            lambda_adv: 1.0,
            memory: true,
            adversarial: true,
            shrink: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_rec, self.lambda_sparse, self.lambda_fm, self.lambda_adv];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::Config(format!("loss weights must be finite and non-negative: {lambdas:?}")));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        self.adam.validate()
    }
}

/// Loss values of one step, or their mean over an epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepLosses {
    pub disc: f64,
    pub rec: f64,
    pub sparse: f64,
    pub fm: f64,
    pub adv: f64,
    /// Weighted generator objective.
    pub total: f64,
}

impl StepLosses {
    fn add_scaled(&mut self, o: &StepLosses, k: f64) {
        self.disc += k * o.disc;
        self.rec += k * o.rec;
        self.sparse += k * o.sparse;
        self.fm += k * o.fm;
        self.adv += k * o.adv;
        self.total += k * o.total;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based index of the finished epoch.
    pub epoch: usize,
    pub losses: StepLosses,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,loss_d,loss_rec,loss_sparse,loss_fm,loss_adv,loss_g,auroc,auprc";

    pub fn csv_row(&self) -> String {
        let l = &self.losses;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epoch,
            l.disc,
            l.rec,
            l.sparse,
            l.fm,
            l.adv,
            l.total,
            opt(self.auroc),
            opt(self.auprc)
        )
    }
}

/// Generator and discriminator parameters with their optimizer state.
#[derive(Clone, Debug)]
pub struct Level1 {
    pub arch: Arch,
    pub cfg: TrainConfig,
    pub gen: ParamSet,
    pub disc: ParamSet,
    epoch: usize,
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

fn finite(step: u64, component: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Diverged { step, component, value })
    }
}

impl Level1 {
    pub fn new(arch: Arch, cfg: TrainConfig) -> Result<Self> {
        arch.validate()?;
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let flags = GenFlags { memory: cfg.memory, shrink: cfg.shrink };
        let gen = init_generator(&arch, flags, &mut rng);
        let disc = init_discriminator(&arch, &mut rng);
        Ok(Level1 { arch, cfg, gen, disc, epoch: 0 })
    }

    pub fn flags(&self) -> GenFlags {
        GenFlags { memory: self.cfg.memory, shrink: self.cfg.shrink }
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One discriminator update (when adversarial training is on) followed
    /// by one generator update. `x` holds `batch` beats back to back.
    pub fn train_step<R: Rng + ?Sized>(&mut self, x: &[f64], rng: &mut R) -> Result<StepLosses> {
        let b = x.len() / BEAT_LEN;
        if b < 2 || !x.len().is_multiple_of(BEAT_LEN) {
            return Err(Error::invalid(format!("train_step needs at least 2 whole beats, got {} values", x.len())));
        }
        let step = self.gen.step();
        let flags = self.flags();
        let cfg = self.cfg;
        let mut losses = StepLosses::default();

        let mut tape = Tape::new();
        let xv = tape.constant_from(vec![b, BEAT_LEN], x.to_vec())?;
        let (out, gen_stats) = {
            let mut f = Forward::new(&mut tape, &self.gen, Mode::Train);
            let out = generator_forward(&mut f, xv, flags)?;
            (out, std::mem::take(&mut f.stats))
        };

        if cfg.adversarial {
            losses.disc = self.discriminator_step(x, tape.value(out.x_hat), b, step)?;
        }

        let rec = reconstruction_loss(&mut tape, xv, out.x_hat)?;
        losses.rec = finite(step, "reconstruction loss", tape.scalar(rec))?;
        let mut total = ops::scale(&mut tape, rec, cfg.lambda_rec);
        if let Some(w) = out.w {
            let sparse = memory::sparsity_loss(&mut tape, w)?;
            losses.sparse = finite(step, "sparsity loss", tape.scalar(sparse))?;
            total = weighted_add(&mut tape, total, sparse, cfg.lambda_sparse)?;
        }
        if cfg.adversarial {
            let mut f = Forward::new(&mut tape, &self.disc, Mode::Train).frozen();
            let (fake_logit, h_fake) = discriminator_forward(&mut f, out.x_hat)?;
            let h_real = disc_features(&mut f, xv)?;
            let fm = feature_matching_loss(&mut tape, h_real, h_fake)?;
            let adv = generator_adv_loss(&mut tape, fake_logit);
            losses.fm = finite(step, "feature matching loss", tape.scalar(fm))?;
            losses.adv = finite(step, "generator adversarial loss", tape.scalar(adv))?;
            total = weighted_add(&mut tape, total, fm, cfg.lambda_fm)?;
            total = weighted_add(&mut tape, total, adv, cfg.lambda_adv)?;
        }
        losses.total = finite(step, "generator loss", tape.scalar(total))?;

        tape.backward(total)?;
        self.gen.zero_grads();
        self.gen.accumulate_grads(&tape)?;
        self.gen.adam_step(&cfg.adam)?;
        nn::update_running_stats(&mut self.gen, &gen_stats)?;
        if cfg.memory {
            let replaced = memory::repair_rows(self.gen.require_mut("mem.omega")?, rng);
            if replaced > 0 {
                log::warn!("re-initialized {replaced} degenerate memory rows at step {step}");
            }
        }
        Ok(losses)
    }

    fn discriminator_step(&mut self, real: &[f64], fake: &[f64], b: usize, step: u64) -> Result<f64> {
        let mut tape = Tape::new();
        let xr = tape.constant_from(vec![b, BEAT_LEN], real.to_vec())?;
        let xf = tape.constant_from(vec![b, BEAT_LEN], fake.to_vec())?;
        let mut f = Forward::new(&mut tape, &self.disc, Mode::Train);
        let (real_logit, _) = discriminator_forward(&mut f, xr)?;
        let (fake_logit, _) = discriminator_forward(&mut f, xf)?;
        let stats = std::mem::take(&mut f.stats);
        let (loss, _) = adversarial_losses(&mut tape, real_logit, fake_logit)?;
        let value = finite(step, "discriminator loss", tape.scalar(loss))?;
        tape.backward(loss)?;
        self.disc.zero_grads();
        self.disc.accumulate_grads(&tape)?;
        self.disc.adam_step(&self.cfg.adam)?;
        nn::update_running_stats(&mut self.disc, &stats)?;
        Ok(value)
    }

    /// One pass over `data` in an order drawn from `(seed, epoch)`. A final
    /// batch with a single beat is skipped.
    pub fn train_epoch(&mut self, data: &[Vec<f64>]) -> Result<StepLosses> {
        let mut rng = epoch_rng(self.cfg.seed, self.epoch);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let mut mean = StepLosses::default();
        let mut batches = 0usize;
        let mut buf = Vec::with_capacity(self.cfg.batch_size * BEAT_LEN);
        for chunk in order.chunks(self.cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            buf.clear();
            for &i in chunk {
                if data[i].len() != BEAT_LEN {
                    return Err(Error::Dimension {
                        op: "train_epoch",
                        axis: "length",
                        expected: BEAT_LEN,
                        found: data[i].len(),
                    });
                }
                buf.extend_from_slice(&data[i]);
            }
            let l = self.train_step(&buf, &mut rng)?;
            mean.add_scaled(&l, 1.0);
            batches += 1;
        }
        if batches == 0 {
            return Err(Error::invalid("training set yields no batch of at least 2 beats"));
        }
        let mut out = StepLosses::default();
        out.add_scaled(&mean, 1.0 / batches as f64);
        self.epoch += 1;
        Ok(out)
    }

    /// Trains until `cfg.epochs` epochs are complete. When `eval` holds beats
    /// and anomaly labels, each epoch also reports test AUROC/AUPRC.
    pub fn fit(
        &mut self,
        data: &[Vec<f64>],
        eval: Option<(&[Vec<f64>], &[bool])>,
        mut on_epoch: impl FnMut(&EpochLog),
    ) -> Result<Vec<EpochLog>> {
        let mut logs = Vec::new();
        while self.epoch < self.cfg.epochs {
            let losses = self.train_epoch(data)?;
            let (mut auroc, mut auprc) = (None, None);
            if let Some((beats, labels)) = eval {
                let scores = self.scores(beats)?;
                auroc = Some(metrics::auroc(&scores, labels)?);
                auprc = Some(metrics::auprc(&scores, labels)?);
            }
            let log = EpochLog { epoch: self.epoch, losses, auroc, auprc };
            on_epoch(&log);
            logs.push(log);
        }
        Ok(logs)
    }

    /// Inference-mode reconstructions.
    pub fn reconstruct(&self, beats: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(beats.len());
        for chunk in beats.chunks(SCORE_BATCH) {
            let mut tape = Tape::new();
            let x = batch_var(&mut tape, chunk)?;
            let mut f = Forward::new(&mut tape, &self.gen, Mode::Eval).frozen();
            let g = generator_forward(&mut f, x, self.flags())?;
            out.extend(tape.value(g.x_hat).chunks(BEAT_LEN).map(<[f64]>::to_vec));
        }
        Ok(out)
    }

    /// Anomaly score `‖x − G(x)‖` of each beat.
    pub fn scores(&self, beats: &[Vec<f64>]) -> Result<Vec<f64>> {
        let rec = self.reconstruct(beats)?;
        Ok(beats.iter().zip(&rec).map(|(x, r)| anomaly_score(x, r)).collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        let c_ = &self.cfg;
        let meta: [(&str, f64); 17] = [
            ("width", self.arch.width as f64),
            ("latent", self.arch.latent as f64),
            ("slots", self.arch.slots as f64),
            ("lr", c_.adam.lr),
            ("beta1", c_.adam.beta1),
            ("beta2", c_.adam.beta2),
            ("eps", c_.adam.eps),
            ("epochs", c_.epochs as f64),
            ("batch_size", c_.batch_size as f64),
            ("lambda_rec", c_.lambda_rec),
            ("lambda_sparse", c_.lambda_sparse),
            ("lambda_fm", c_.lambda_fm),
            ("lambda_adv", c_.lambda_adv),
            ("memory", c_.memory as u8 as f64),
            ("adversarial", c_.adversarial as u8 as f64),
            ("shrink", c_.shrink as u8 as f64),
            ("epoch", self.epoch as f64),
        ];
        for (k, v) in meta {
            c.push(format!("meta.{k}"), Tensor::scalar(v));
        }
        c.push("meta.seed_hi", Tensor::scalar((c_.seed >> 32) as f64));
        c.push("meta.seed_lo", Tensor::scalar((c_.seed & 0xFFFF_FFFF) as f64));
        c.extend(self.gen.export("g.", true));
        c.extend(self.disc.export("d.", true));
        c
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let m = |k: &str| ckpt.scalar(&format!("meta.{k}"));
        let count = |k: &str| -> Result<usize> { Ok(m(k)? as usize) };
        let flag = |k: &str| -> Result<bool> { Ok(m(k)? != 0.0) };
        let arch = Arch { width: count("width")?, latent: count("latent")?, slots: count("slots")? };
        let cfg = TrainConfig {
            adam: AdamConfig { lr: m("lr")?, beta1: m("beta1")?, beta2: m("beta2")?, eps: m("eps")? },
            epochs: count("epochs")?,
            batch_size: count("batch_size")?,
            lambda_rec: m("lambda_rec")?,
            lambda_sparse: m("lambda_sparse")?,
            lambda_fm: m("lambda_fm")?,
            lambda_adv: m("lambda_adv")?,
            memory: flag("memory")?,
            adversarial: flag("adversarial")?,
            shrink: flag("shrink")?,
            seed: ((m("seed_hi")? as u64) << 32) | m("seed_lo")? as u64,
        };
        arch.validate()?;
        let gen = ParamSet::import(ckpt.iter(), "g.")?;
        let disc = ParamSet::import(ckpt.iter(), "d.")?;
        let model = Level1 { arch, cfg, gen, disc, epoch: count("epoch")? };
        model.check_layout()?;
        Ok(model)
    }

    /// Compares parameter names and shapes against a freshly built model.
    fn check_layout(&self) -> Result<()> {
        let fresh = Level1::new(self.arch, self.cfg)?;
        for (want, have) in [(&fresh.gen, &self.gen), (&fresh.disc, &self.disc)] {
            for (name, t) in want.iter() {
                let got = have.get(name).ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
                if got.shape() != t.shape() {
                    return Err(Error::Checkpoint(format!(
                        "`{name}` has shape {:?}, architecture expects {:?}",
                        got.shape(),
                        t.shape()
                    )));
                }
            }
            if want.len() != have.len() {
                return Err(Error::Checkpoint("unexpected extra parameters".into()));
            }
        }
        Ok(())
    }
}

fn weighted_add(tape: &mut Tape, acc: Var, term: Var, weight: f64) -> Result<Var> {
    let t = ops::scale(tape, term, weight);
    ops::add(tape, acc, t)
}

pub(crate) fn batch_var(tape: &mut Tape, beats: &[Vec<f64>]) -> Result<Var> {
    let mut data = Vec::with_capacity(beats.len() * BEAT_LEN);
    for b in beats {
        if b.len() != BEAT_LEN {
            return Err(Error::Dimension { op: "beat batch", axis: "length", expected: BEAT_LEN, found: b.len() });
        }
        data.extend_from_slice(b);
    }
    tape.constant_from(vec![beats.len(), BEAT_LEN], data)
}

/// `‖x − x̂‖`.
pub fn anomaly_score(x: &[f64], x_hat: &[f64]) -> f64 {
    x.iter().zip(x_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Min-max scaling `(s − min)/(max − min)` onto `[0, 1]`.
pub fn scale_scores(scores: &[f64]) -> Result<Vec<f64>> {
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::invalid("scale_scores needs finite, non-empty scores"));
    }
    if max == min {
        return Err(Error::invalid("scale_scores: all scores are equal (zero range)"));
    }
    let range = max - min;
    Ok(scores.iter().map(|&s| if s == max { 1.0 } else { (s - min) / range }).collect())
}
