//! Second-level arrhythmia classifier: the frozen discriminator trunk as a
//! feature extractor, a shallow convolution, and several softmax branches,
//! each trained on its own class-balanced under-sample.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Class;
use crate::error::{Error, Result};
use crate::gan::{disc_features, init_discriminator, Arch, Level1, TRUNK_LEN};
use crate::metrics::{argmax, kfold, EvalReport};
use crate::nn::{self, Forward, Mode};
use crate::tensor::ops;
use crate::tensor::{AdamConfig, Checkpoint, ParamSet, Tape, Tensor, Var};
use crate::BEAT_LEN;

pub const HEAD_CHANNELS: usize = 32;
pub const HEAD_STRIDE: usize = 2;
pub const DEFAULT_BRANCHES: usize = 4;
/// Number of classes handled by the second level (S, V, F).
pub const CLASSES: usize = 3;
const FEATURE_BATCH: usize = 128;

fn subset_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Index sets over the training data, one per branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalancedSubsets {
    /// Sorted sample indices of each subset.
    pub members: Vec<Vec<usize>>,
    /// Samples per class in every subset.
    pub per_class: usize,
}

impl BalancedSubsets {
    /// The whole dataset as a single subset, without balancing.
    pub fn full(n: usize) -> Self {
        BalancedSubsets { members: vec![(0..n).collect()], per_class: 0 }
    }

    pub fn branches(&self) -> usize {
        self.members.len()
    }

    /// `mask[branch][sample]` with 1.0 for members.
    pub fn masks(&self, n: usize) -> Vec<Vec<f64>> {
        self.members
            .iter()
            .map(|m| {
                let mut mask = vec![0.0; n];
                m.iter().for_each(|&i| mask[i] = 1.0);
                mask
            })
            .collect()
    }
}

/// Under-samples every class down to the smallest class size, with an
/// independent draw per subset. The smallest class is kept whole.
pub fn build_balanced_subsets(labels: &[usize], classes: usize, branches: usize, seed: u64) -> Result<BalancedSubsets> {
    if branches < 1 {
        return Err(Error::invalid("at least one branch is required"));
    }
    if classes < 2 {
        return Err(Error::invalid(format!("balancing needs at least 2 classes, got {classes}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class.get_mut(l).ok_or_else(|| Error::invalid(format!("label {l} outside 0..{classes}")))?.push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!("class {c} has no samples")));
    }
    let per_class = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let members = (0..branches)
        .map(|b| {
            let mut rng = subset_rng(seed, b as u64 + 1);
            let mut m: Vec<usize> = by_class
                .iter()
                .flat_map(|idx| {
                    if idx.len() == per_class {
                        idx.clone()
                    } else {
                        index::sample(&mut rng, idx.len(), per_class).into_iter().map(|k| idx[k]).collect()
                    }
                })
                .collect();
            m.sort_unstable();
            m
        })
        .collect();
    Ok(BalancedSubsets { members, per_class })
}

/// The discriminator trunk with frozen parameters and inference-mode
/// batch normalization.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    pub arch: Arch,
    params: ParamSet,
}

impl FeatureExtractor {
    fn from_disc(arch: Arch, disc: &ParamSet) -> Result<Self> {
        let mut params = ParamSet::new();
        for (name, t) in disc.iter() {
            if name.starts_with("disc.") && name.split('.').nth(1).is_some_and(|s| s.parse::<usize>().is_ok()) {
                params.insert(name, t.clone(), false);
            }
        }
        if params.is_empty() {
            return Err(Error::Checkpoint("discriminator trunk parameters not found".into()));
        }
        Ok(FeatureExtractor { arch, params })
    }

    /// Trunk of a trained level-1 discriminator.
    pub fn from_level1(model: &Level1) -> Result<Self> {
        Self::from_disc(model.arch, &model.disc)
    }

    /// Same-shape trunk with fresh random weights.
    pub fn random(arch: Arch, seed: u64) -> Result<Self> {
        arch.validate()?;
        Self::from_disc(arch, &init_discriminator(&arch, &mut ChaCha8Rng::seed_from_u64(seed)))
    }

    /// Replaces the batch-norm running statistics with those of `beats`,
    /// taken in one full batch. Gives a random trunk usable feature scales.
    pub fn calibrate(&mut self, beats: &[Vec<f64>]) -> Result<()> {
        let mut tape = Tape::new();
        let x = crate::gan::train::batch_var(&mut tape, beats)?;
        let mut f = Forward::new(&mut tape, &self.params, Mode::Train).frozen();
        disc_features(&mut f, x)?;
        let stats = std::mem::take(&mut f.stats);
        nn::fold_running_stats(&mut self.params, &stats, 1.0)
    }

    pub fn channels(&self) -> usize {
        self.arch.feature_channels()
    }

    /// Values per beat: channels × trunk length.
    pub fn feature_len(&self) -> usize {
        self.channels() * TRUNK_LEN
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn checksum(&self) -> u64 {
        self.params.checksum()
    }

    /// Flattened `[channels, 10]` feature maps of model-ready beats.
    pub fn extract(&self, beats: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(beats.len());
        for chunk in beats.chunks(FEATURE_BATCH) {
            let mut tape = Tape::new();
            let x = crate::gan::train::batch_var(&mut tape, chunk)?;
            let mut f = Forward::new(&mut tape, &self.params, Mode::Eval).frozen();
            let h = disc_features(&mut f, x)?;
            out.extend(tape.value(h).chunks(self.feature_len()).map(<[f64]>::to_vec));
        }
        Ok(out)
    }
}

/// Shared `conv1d(k=1, stride 2) → leaky ReLU` stage feeding one linear
/// softmax layer per branch.
#[derive(Clone, Debug)]
pub struct BranchHead {
    pub in_channels: usize,
    pub branches: usize,
    pub classes: usize,
    pub params: ParamSet,
}

fn branch_name(i: usize) -> String {
    format!("head.branch{i}")
}

impl BranchHead {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, branches: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if branches < 1 || classes < 2 || in_channels < 1 {
            return Err(Error::invalid(format!(
                "head needs ≥1 channel, ≥1 branch and ≥2 classes: ({in_channels}, {branches}, {classes})"
            )));
        }
        let mut p = ParamSet::new();
        nn::init_conv(&mut p, rng, "head.conv", [HEAD_CHANNELS, in_channels, 1], true);
        for i in 0..branches {
            nn::init_linear(&mut p, rng, &branch_name(i), classes, Self::flat_len());
        }
        Ok(BranchHead { in_channels, branches, classes, params: p })
    }

    fn flat_len() -> usize {
        HEAD_CHANNELS * TRUNK_LEN.div_ceil(HEAD_STRIDE)
    }

    /// Branch logits `[batch, classes]` from features `[batch, channels·10]`.
    pub fn forward(&self, f: &mut Forward, feats: Var) -> Result<Vec<Var>> {
        let b = f.tape.shape(feats)[0];
        let x = ops::reshape(f.tape, feats, vec![b, self.in_channels, TRUNK_LEN])?;
        let y = f.conv(x, "head.conv", HEAD_STRIDE, 0)?;
        let y = ops::leaky_relu(f.tape, y, nn::LEAKY_SLOPE)?;
        let y = ops::reshape(f.tape, y, vec![b, Self::flat_len()])?;
        (0..self.branches).map(|i| f.linear(y, &branch_name(i))).collect()
    }

    /// Per-branch class probabilities `[branch][sample][class]`.
    pub fn branch_probs(&self, feats: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut out = vec![Vec::with_capacity(feats.len()); self.branches];
        for chunk in feats.chunks(FEATURE_BATCH) {
            let mut tape = Tape::new();
            let x = feature_var(&mut tape, chunk, self.in_channels * TRUNK_LEN)?;
            let mut f = Forward::new(&mut tape, &self.params, Mode::Eval).frozen();
            let logits = self.forward(&mut f, x)?;
            for (i, l) in logits.into_iter().enumerate() {
                let p = ops::softmax_rows(&mut tape, l)?;
                out[i].extend(tape.value(p).chunks(self.classes).map(<[f64]>::to_vec));
            }
        }
        Ok(out)
    }

    /// Branch-averaged class probabilities.
    pub fn predict(&self, feats: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(average_branches(&self.branch_probs(feats)?))
    }
}

fn feature_var(tape: &mut Tape, feats: &[Vec<f64>], len: usize) -> Result<Var> {
    let mut data = Vec::with_capacity(feats.len() * len);
    for f in feats {
        if f.len() != len {
            return Err(Error::Dimension { op: "feature batch", axis: "length", expected: len, found: f.len() });
        }
        data.extend_from_slice(f);
    }
    tape.constant_from(vec![feats.len(), len], data)
}

/// Mean of the branch probability vectors for each sample.
pub fn average_branches(probs: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let nb = probs.len() as f64;
    let Some(first) = probs.first() else { return Vec::new() };
    (0..first.len())
        .map(|s| {
            let mut acc = vec![0.0; first[s].len()];
            for b in probs {
                acc.iter_mut().zip(&b[s]).for_each(|(a, p)| *a += p);
            }
            acc.iter_mut().for_each(|a| *a /= nb);
            acc
        })
        .collect()
}

/// Sum over branches of membership-gated cross-entropy. Samples that
/// belong to no branch contribute nothing; their count is returned.
pub fn mb_loss(tape: &mut Tape, logits: &[Var], targets: &[usize], masks: &[Vec<f64>]) -> Result<(Var, usize)> {
    if logits.len() != masks.len() || logits.is_empty() {
        return Err(Error::Dimension { op: "mb_loss", axis: "branches", expected: logits.len(), found: masks.len() });
    }
    let orphans = (0..targets.len()).filter(|&s| masks.iter().all(|m| m[s] == 0.0)).count();
    let mut total = ops::masked_cross_entropy(tape, logits[0], targets, &masks[0])?;
    for (l, m) in logits.iter().zip(masks).skip(1) {
        let ce = ops::masked_cross_entropy(tape, *l, targets, m)?;
        total = ops::add(tape, total, ce)?;
    }
    Ok((total, orphans))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level2Config {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub branches: usize,
    /// Under-sample each branch to balanced classes; off trains every
    /// branch on the full data.
    pub balance: bool,
    /// Fraction of each class held out for testing.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for Level2Config {
    fn default() -> Self {
        Level2Config {
            adam: AdamConfig::default(),
            epochs: 50,
            batch_size: 64,
            branches: DEFAULT_BRANCHES,
            balance: true,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

impl Level2Config {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.branches == 0 {
            return Err(Error::Config("epochs, batch_size and branches must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction {} outside (0, 1)", self.test_fraction)));
        }
        self.adam.validate()
    }
}

/// Stratified train/test split: each class contributes `round(frac·n_c)`
/// test samples, drawn with a seeded shuffle.
pub fn stratified_split(labels: &[usize], classes: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = subset_rng(seed, 0);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let k = (test_fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Trained head together with its extractor.
#[derive(Clone, Debug)]
pub struct Level2 {
    pub extractor: FeatureExtractor,
    pub head: BranchHead,
    pub cfg: Level2Config,
}

/// Held-out evaluation of a level-2 run.
#[derive(Clone, Debug)]
pub struct Level2Outcome {
    pub model: Level2,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub test_probs: Vec<Vec<f64>>,
    pub report: EvalReport,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
    /// Training samples outside every branch subset.
    pub orphans: usize,
}

/// Trains a head on precomputed features of a fixed training set.
pub fn fit_head(
    feats: &[Vec<f64>],
    labels: &[usize],
    in_channels: usize,
    cfg: &Level2Config,
) -> Result<(BranchHead, Vec<f64>, usize)> {
    cfg.validate()?;
    let subsets = if cfg.balance {
        build_balanced_subsets(labels, CLASSES, cfg.branches, cfg.seed)?
    } else {
        let full = BalancedSubsets::full(labels.len());
        BalancedSubsets { members: vec![full.members[0].clone(); cfg.branches], per_class: 0 }
    };
    let masks = subsets.masks(labels.len());
    let mut head = BranchHead::new(in_channels, cfg.branches, CLASSES, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let len = in_channels * TRUNK_LEN;
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut orphans = 0;
    for epoch in 0..cfg.epochs {
        let mut rng = subset_rng(cfg.seed, epoch as u64 + 1);
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut rng);
        let (mut sum, mut n) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| feats[i].clone()).collect();
            let targets: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let bm: Vec<Vec<f64>> = masks.iter().map(|m| chunk.iter().map(|&i| m[i]).collect()).collect();
            if bm.iter().all(|m| m.iter().all(|&v| v == 0.0)) {
                orphans += chunk.len();
                continue;
            }
            let mut tape = Tape::new();
            let x = feature_var(&mut tape, &batch, len)?;
            let mut f = Forward::new(&mut tape, &head.params, Mode::Train);
            let logits = head.forward(&mut f, x)?;
            let (loss, o) = mb_loss(&mut tape, &logits, &targets, &bm)?;
            orphans += o;
            let value = tape.scalar(loss);
            if !value.is_finite() {
                return Err(Error::Diverged { step: head.params.step(), component: "level-2 loss", value });
            }
            sum += value;
            n += chunk.len();
            tape.backward(loss)?;
            head.params.zero_grads();
            head.params.accumulate_grads(&tape)?;
            head.params.adam_step(&cfg.adam)?;
        }
        losses.push(if n > 0 { sum / n as f64 } else { 0.0 });
    }
    if orphans > 0 {
        log::warn!("{orphans} sample visits fell outside every branch subset and were skipped");
    }
    Ok((head, losses, orphans))
}

/// Splits abnormal beats 90/10 per class, trains a head on the extractor's
/// features of the training part and evaluates on the rest.
pub fn train_second_level(
    beats: &[Vec<f64>],
    labels: &[usize],
    extractor: FeatureExtractor,
    cfg: &Level2Config,
) -> Result<Level2Outcome> {
    cfg.validate()?;
    if beats.len() != labels.len() {
        return Err(Error::Dimension {
            op: "train_second_level",
            axis: "samples",
            expected: beats.len(),
            found: labels.len(),
        });
    }
    if let Some(b) = beats.iter().find(|b| b.len() != BEAT_LEN) {
        return Err(Error::Dimension { op: "train_second_level", axis: "length", expected: BEAT_LEN, found: b.len() });
    }
    let (train_idx, test_idx) = stratified_split(labels, CLASSES, cfg.test_fraction, cfg.seed);
    for c in 0..CLASSES {
        if !train_idx.iter().any(|&i| labels[i] == c) {
            return Err(Error::invalid(format!(
                "class {} is absent from the training split",
                Class::ABNORMAL[c].token()
            )));
        }
    }
    let before = extractor.checksum();
    let feats = extractor.extract(beats)?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (idx.iter().map(|&i| feats[i].clone()).collect(), idx.iter().map(|&i| labels[i]).collect())
    };
    let (tr_x, tr_y) = pick(&train_idx);
    let (te_x, te_y) = pick(&test_idx);
    let (head, losses, orphans) = fit_head(&tr_x, &tr_y, extractor.channels(), cfg)?;
    if extractor.checksum() != before {
        return Err(Error::invalid("feature extractor changed during training"));
    }
    let test_probs = head.predict(&te_x)?;
    let names: Vec<&str> = Class::ABNORMAL.iter().map(|c| c.token()).collect();
    let report = EvalReport::multiclass(&test_probs, &te_y, &names)?;
    Ok(Level2Outcome {
        model: Level2 { extractor, head, cfg: *cfg },
        train_idx,
        test_idx,
        test_probs,
        report,
        losses,
        orphans,
    })
}

impl Level2 {
    pub fn predict(&self, beats: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.head.predict(&self.extractor.extract(beats)?)
    }

    /// Appends the head to a level-1 checkpoint.
    pub fn append_to(&self, ckpt: &mut Checkpoint) {
        ckpt.remove_prefix("h.");
        ckpt.remove_prefix("meta.l2.");
        for (k, v) in [
            ("branches", self.head.branches as f64),
            ("classes", self.head.classes as f64),
            ("in_channels", self.head.in_channels as f64),
        ] {
            ckpt.push(format!("meta.l2.{k}"), Tensor::scalar(v));
        }
        ckpt.extend(self.head.params.export("h.", false));
    }

    /// Level-1 model and head from a combined checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Level1, Level2)> {
        let level1 = Level1::from_checkpoint(ckpt)?;
        let m = |k: &str| ckpt.scalar(&format!("meta.l2.{k}")).map(|v| v as usize);
        let (branches, classes, in_channels) = (m("branches")?, m("classes")?, m("in_channels")?);
        let params = ParamSet::import(ckpt.iter(), "h.")?;
        let fresh = BranchHead::new(in_channels, branches, classes, &mut ChaCha8Rng::seed_from_u64(0))?;
        for (name, t) in fresh.params.iter() {
            match params.get(name) {
                Some(p) if p.shape() == t.shape() => {}
                _ => return Err(Error::Checkpoint(format!("head parameter `{name}` missing or misshapen"))),
            }
        }
        let extractor = FeatureExtractor::from_level1(&level1)?;
        if extractor.channels() != in_channels {
            return Err(Error::Checkpoint("head does not match the discriminator width".into()));
        }
        let head = BranchHead { in_channels, branches, classes, params };
        let cfg = Level2Config { branches, ..Default::default() };
        Ok((level1, Level2 { extractor, head, cfg }))
    }
}

/// `id,p_S,p_V,p_F,pred[,label]` rows.
pub fn write_predictions<W: Write>(
    mut w: W,
    ids: &[String],
    probs: &[Vec<f64>],
    truth: Option<&[usize]>,
) -> Result<()> {
    let names: Vec<&str> = Class::ABNORMAL.iter().map(|c| c.token()).collect();
    write!(w, "id")?;
    for n in &names {
        write!(w, ",p_{n}")?;
    }
    writeln!(w, ",pred{}", if truth.is_some() { ",label" } else { "" })?;
    for (i, (id, p)) in ids.iter().zip(probs).enumerate() {
        write!(w, "{id}")?;
        for v in p {
            write!(w, ",{v}")?;
        }
        write!(w, ",{}", names[argmax(p)])?;
        if let Some(t) = truth {
            write!(w, ",{}", names[t[i]])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Stratified k-fold evaluation of the head on fixed features.
pub fn cross_validate(
    feats: &[Vec<f64>],
    labels: &[usize],
    in_channels: usize,
    k: usize,
    cfg: &Level2Config,
) -> Result<Vec<EvalReport>> {
    let names: Vec<&str> = Class::ABNORMAL.iter().map(|c| c.token()).collect();
    kfold(labels, k, cfg.seed, true)?
        .into_iter()
        .map(|fold| {
            let tr_x: Vec<Vec<f64>> = fold.train.iter().map(|&i| feats[i].clone()).collect();
            let tr_y: Vec<usize> = fold.train.iter().map(|&i| labels[i]).collect();
            let te_x: Vec<Vec<f64>> = fold.test.iter().map(|&i| feats[i].clone()).collect();
            let te_y: Vec<usize> = fold.test.iter().map(|&i| labels[i]).collect();
            let (head, _, _) = fit_head(&tr_x, &tr_y, in_channels, cfg)?;
            EvalReport::multiclass(&head.predict(&te_x)?, &te_y, &names)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_balance_classes() {
        let labels: Vec<usize> = [vec![0; 30], vec![1; 70], vec![2; 8]].concat();
        let s = build_balanced_subsets(&labels, 3, 4, 1).unwrap();
        assert_eq!(s.per_class, 8);
        for m in &s.members {
            let mut c = [0; 3];
            m.iter().for_each(|&i| c[labels[i]] += 1);
            assert_eq!(c, [8, 8, 8]);
            assert!((100..108).all(|i| m.contains(&i)));
        }
        assert_ne!(s.members[0], s.members[1]);
        assert_eq!(s, build_balanced_subsets(&labels, 3, 4, 1).unwrap());
    }

    #[test]
    fn balanced_input_is_kept_whole() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let s = build_balanced_subsets(&labels, 3, 2, 0).unwrap();
        assert!(s.members.iter().all(|m| m.len() == 30));
    }

    #[test]
    fn subset_errors() {
        assert!(build_balanced_subsets(&[0, 0], 1, 4, 0).is_err());
        assert!(build_balanced_subsets(&[0, 1], 2, 0, 0).is_err());
        assert!(build_balanced_subsets(&[0, 0, 1], 3, 2, 0).is_err());
    }

    #[test]
    fn average_of_two_branches() {
        let p = average_branches(&[vec![vec![0.8, 0.1, 0.1]], vec![vec![0.6, 0.3, 0.1]]]);
        for (a, b) in p[0].iter().zip([0.7, 0.2, 0.1]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_logits_cost_log3_per_pair() {
        let mut tape = Tape::new();
        let l = tape.constant_from(vec![2, 3], vec![0.0; 6]).unwrap();
        let masks = vec![vec![1.0, 1.0], vec![1.0, 0.0]];
        let (loss, orphans) = mb_loss(&mut tape, &[l, l], &[0, 2], &masks).unwrap();
        assert!((tape.scalar(loss) - 3.0 * 3f64.ln()).abs() < 1e-12);
        assert_eq!(orphans, 0);
    }

    #[test]
    fn stratified_split_keeps_every_class() {
        let labels: Vec<usize> = [vec![0; 700], vec![1; 300], vec![2; 80]].concat();
        let (tr, te) = stratified_split(&labels, 3, 0.1, 4);
        assert_eq!(tr.len() + te.len(), labels.len());
        let count = |idx: &[usize], c| idx.iter().filter(|&&i| labels[i] == c).count();
        assert_eq!([count(&te, 0), count(&te, 1), count(&te, 2)], [70, 30, 8]);
    }
}
