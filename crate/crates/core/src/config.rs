//! Run configuration as `key = value` text.
//!
//! Blank lines and `#` comments are ignored; unknown keys are errors. Every
//! key has a default, so an empty file is a valid configuration. The
//! resolved form written next to each command's outputs lists every key.

use std::fmt::Write as _;
use std::path::Path;

use crate::classifier::Level2Config;
use crate::data::DEFAULT_EXCLUDED;
use crate::error::{Error, Result};
use crate::gan::{Arch, TrainConfig};
use crate::signal::PrepConfig;
use crate::synth::{Jitter, Mix};
use crate::tensor::AdamConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,

    pub synth_beats: usize,
    pub synth_mix: Mix,
    pub synth_recordings: usize,
    pub synth_duration_s: f64,
    pub synth_bpm: f64,
    /// Multiplies every default jitter and noise level.
    pub synth_difficulty: f64,
    pub synth_wander: f64,

    pub prep_highpass_hz: f64,
    pub prep_taps: usize,
    /// 0 disables the notch.
    pub prep_notch_hz: f64,
    pub prep_exclude: Vec<String>,

    pub model_width: usize,
    pub model_latent: usize,
    pub model_slots: usize,

    pub l1_epochs: usize,
    pub l1_batch_size: usize,
    pub l1_adam: AdamConfig,
    pub l1_lambda_rec: f64,
    pub l1_lambda_sparse: f64,
    pub l1_lambda_fm: f64,
    pub l1_lambda_adv: f64,
    pub l1_memory: bool,
    pub l1_adversarial: bool,
    pub l1_shrink: bool,
    pub l1_test_fraction: f64,

    pub l2_epochs: usize,
    pub l2_batch_size: usize,
    pub l2_adam: AdamConfig,
    pub l2_branches: usize,
    pub l2_balance: bool,
    pub l2_test_fraction: f64,

    pub eval_folds: usize,
    pub eval_val_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let l2 = Level2Config::default();
        let p = PrepConfig::default();
        RunConfig {
            seed: 0,
            synth_beats: 2000,
            synth_mix: Mix::NORMAL,
            synth_recordings: 0,
            synth_duration_s: 60.0,
            synth_bpm: 72.0,
            synth_difficulty: 1.0,
            synth_wander: 0.0,
            prep_highpass_hz: p.highpass_hz,
            prep_taps: p.taps,
            prep_notch_hz: 0.0,
            prep_exclude: DEFAULT_EXCLUDED.iter().map(|s| s.to_string()).collect(),
            model_width: Arch::FULL.width,
            model_latent: Arch::FULL.latent,
            model_slots: Arch::FULL.slots,
            l1_epochs: t.epochs,
            l1_batch_size: t.batch_size,
            l1_adam: t.adam,
            l1_lambda_rec: t.lambda_rec,
            l1_lambda_sparse: t.lambda_sparse,
            l1_lambda_fm: t.lambda_fm,
            l1_lambda_adv: t.lambda_adv,
            l1_memory: t.memory,
            l1_adversarial: t.adversarial,
            l1_shrink: t.shrink,
            l1_test_fraction: 0.1,
            l2_epochs: l2.epochs,
            l2_batch_size: l2.batch_size,
            l2_adam: l2.adam,
            l2_branches: l2.branches,
            l2_balance: l2.balance,
            l2_test_fraction: l2.test_fraction,
            eval_folds: 5,
            eval_val_fraction: 0.2,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

impl RunConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "synth.beats" => self.synth_beats = parse(key, v)?,
            "synth.mix" => self.synth_mix = v.parse().map_err(|e: Error| Error::Config(format!("`{key}`: {e}")))?,
            "synth.recordings" => self.synth_recordings = parse(key, v)?,
            "synth.duration_s" => self.synth_duration_s = parse(key, v)?,
            "synth.bpm" => self.synth_bpm = parse(key, v)?,
            "synth.difficulty" => self.synth_difficulty = parse(key, v)?,
            "synth.wander" => self.synth_wander = parse(key, v)?,
            "prep.highpass_hz" => self.prep_highpass_hz = parse(key, v)?,
            "prep.taps" => self.prep_taps = parse(key, v)?,
            "prep.notch_hz" => self.prep_notch_hz = parse(key, v)?,
            "prep.exclude" => {
                self.prep_exclude = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
            }
            "model.width" => self.model_width = parse(key, v)?,
            "model.latent" => self.model_latent = parse(key, v)?,
            "model.slots" => self.model_slots = parse(key, v)?,
            "l1.epochs" => self.l1_epochs = parse(key, v)?,
            "l1.batch_size" => self.l1_batch_size = parse(key, v)?,
            "l1.lr" => self.l1_adam.lr = parse(key, v)?,
            "l1.beta1" => self.l1_adam.beta1 = parse(key, v)?,
            "l1.beta2" => self.l1_adam.beta2 = parse(key, v)?,
            "l1.eps" => self.l1_adam.eps = parse(key, v)?,
            "l1.lambda_rec" => self.l1_lambda_rec = parse(key, v)?,
            "l1.lambda_sparse" => self.l1_lambda_sparse = parse(key, v)?,
            "l1.lambda_fm" => self.l1_lambda_fm = parse(key, v)?,
            "l1.lambda_adv" => self.l1_lambda_adv = parse(key, v)?,
            "l1.memory" => self.l1_memory = parse_bool(key, v)?,
            "l1.adversarial" => self.l1_adversarial = parse_bool(key, v)?,
            "l1.shrink" => self.l1_shrink = parse_bool(key, v)?,
            "l1.test_fraction" => self.l1_test_fraction = parse(key, v)?,
            "l2.epochs" => self.l2_epochs = parse(key, v)?,
            "l2.batch_size" => self.l2_batch_size = parse(key, v)?,
            "l2.lr" => self.l2_adam.lr = parse(key, v)?,
            "l2.beta1" => self.l2_adam.beta1 = parse(key, v)?,
            "l2.beta2" => self.l2_adam.beta2 = parse(key, v)?,
            "l2.eps" => self.l2_adam.eps = parse(key, v)?,
            "l2.branches" => self.l2_branches = parse(key, v)?,
            "l2.balance" => self.l2_balance = parse_bool(key, v)?,
            "l2.test_fraction" => self.l2_test_fraction = parse(key, v)?,
            "eval.folds" => self.eval_folds = parse(key, v)?,
            "eval.val_fraction" => self.eval_val_fraction = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let b = |v: bool| v.to_string();
        vec![
            ("seed", self.seed.to_string()),
            ("synth.beats", self.synth_beats.to_string()),
            ("synth.mix", self.synth_mix.to_string()),
            ("synth.recordings", self.synth_recordings.to_string()),
            ("synth.duration_s", self.synth_duration_s.to_string()),
            ("synth.bpm", self.synth_bpm.to_string()),
            ("synth.difficulty", self.synth_difficulty.to_string()),
            ("synth.wander", self.synth_wander.to_string()),
            ("prep.highpass_hz", self.prep_highpass_hz.to_string()),
            ("prep.taps", self.prep_taps.to_string()),
            ("prep.notch_hz", self.prep_notch_hz.to_string()),
            ("prep.exclude", self.prep_exclude.join(",")),
            ("model.width", self.model_width.to_string()),
            ("model.latent", self.model_latent.to_string()),
            ("model.slots", self.model_slots.to_string()),
            ("l1.epochs", self.l1_epochs.to_string()),
            ("l1.batch_size", self.l1_batch_size.to_string()),
            ("l1.lr", self.l1_adam.lr.to_string()),
            ("l1.beta1", self.l1_adam.beta1.to_string()),
            ("l1.beta2", self.l1_adam.beta2.to_string()),
            ("l1.eps", self.l1_adam.eps.to_string()),
            ("l1.lambda_rec", self.l1_lambda_rec.to_string()),
            ("l1.lambda_sparse", self.l1_lambda_sparse.to_string()),
            ("l1.lambda_fm", self.l1_lambda_fm.to_string()),
            ("l1.lambda_adv", self.l1_lambda_adv.to_string()),
            ("l1.memory", b(self.l1_memory)),
            ("l1.adversarial", b(self.l1_adversarial)),
            ("l1.shrink", b(self.l1_shrink)),
            ("l1.test_fraction", self.l1_test_fraction.to_string()),
            ("l2.epochs", self.l2_epochs.to_string()),
            ("l2.batch_size", self.l2_batch_size.to_string()),
            ("l2.lr", self.l2_adam.lr.to_string()),
            ("l2.beta1", self.l2_adam.beta1.to_string()),
            ("l2.beta2", self.l2_adam.beta2.to_string()),
            ("l2.eps", self.l2_adam.eps.to_string()),
            ("l2.branches", self.l2_branches.to_string()),
            ("l2.balance", b(self.l2_balance)),
            ("l2.test_fraction", self.l2_test_fraction.to_string()),
            ("eval.folds", self.eval_folds.to_string()),
            ("eval.val_fraction", self.eval_val_fraction.to_string()),
        ]
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected `key = value`, got `{line}`") })?;
            self.set(k.trim(), v).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.arch().validate()?;
        self.train_config().validate()?;
        self.level2_config().validate()?;
        for (k, f) in [("l1.test_fraction", self.l1_test_fraction), ("eval.val_fraction", self.eval_val_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("`{k}` must lie in (0, 1), got {f}")));
            }
        }
        if self.eval_folds < 2 {
            return Err(Error::Config("`eval.folds` must be at least 2".into()));
        }
        if !(self.synth_difficulty >= 0.0 && self.synth_difficulty.is_finite()) {
            return Err(Error::Config("`synth.difficulty` must be non-negative".into()));
        }
        if self.prep_taps.is_multiple_of(2) || self.prep_taps < 3 {
            return Err(Error::Config(format!("`prep.taps` must be odd and ≥ 3, got {}", self.prep_taps)));
        }
        Ok(())
    }

    pub fn arch(&self) -> Arch {
        Arch { width: self.model_width, latent: self.model_latent, slots: self.model_slots }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            adam: self.l1_adam,
            epochs: self.l1_epochs,
            batch_size: self.l1_batch_size,
            lambda_rec: self.l1_lambda_rec,
            lambda_sparse: self.l1_lambda_sparse,
            lambda_fm: self.l1_lambda_fm,
            lambda_adv: self.l1_lambda_adv,
            memory: self.l1_memory,
            adversarial: self.l1_adversarial,
            shrink: self.l1_shrink,
            seed: self.seed,
        }
    }

    pub fn level2_config(&self) -> Level2Config {
        Level2Config {
            adam: self.l2_adam,
            epochs: self.l2_epochs,
            batch_size: self.l2_batch_size,
            branches: self.l2_branches,
            balance: self.l2_balance,
            test_fraction: self.l2_test_fraction,
            seed: self.seed,
        }
    }

    pub fn prep_config(&self) -> PrepConfig {
        PrepConfig {
            highpass_hz: self.prep_highpass_hz,
            taps: self.prep_taps,
            notch_hz: (self.prep_notch_hz > 0.0).then_some(self.prep_notch_hz),
        }
    }

    pub fn jitter(&self) -> Jitter {
        let d = Jitter::default();
        let k = self.synth_difficulty;
        Jitter { amplitude: d.amplitude * k, width: d.width * k, shift: d.shift * k, noise: d.noise * k }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        match RunConfig::parse("seed = 3\nl1.epoch = 5\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("unknown key"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text("seed = 7\nl1.memory = false\nsynth.mix = N:0.5,V:0.5\nprep.exclude = 102\nl1.lr = 0.001")
            .unwrap();
        let again = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), c.to_text());
        assert!(!again.train_config().memory);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::parse("l1.memory = maybe").is_err());
        assert!(RunConfig::parse("synth.mix = N:0.5").is_err());
        assert!(RunConfig::parse("prep.taps = 300").is_err());
        assert!(RunConfig::parse("model.width = 0").is_err());
    }
}
