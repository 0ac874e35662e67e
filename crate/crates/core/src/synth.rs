//! Synthetic beats and recordings built from sums of Gaussian waves, with
//! known labels and R-peak positions.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Normal, StandardNormal};

use crate::data::{Annotation, BeatRecord, Class, EcgRecording, Signal};
use crate::error::{Error, Result};
use crate::signal::PRE_R;
use crate::BEAT_LEN;

pub const SAMPLE_RATE: f64 = 360.0;
pub const DEFAULT_NOISE: f64 = 0.05;
pub const ADC_GAIN: f64 = 200.0;
pub const ADC_ZERO: i32 = 1024;
/// Span rendered around each R peak in a recording, in seconds.
const SUPPORT_S: f64 = 0.6;

/// One Gaussian wave; times are seconds relative to the R peak.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wave {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Wave {
    pub const fn new(center: f64, width: f64, amplitude: f64) -> Self {
        Wave { center, width, amplitude }
    }

    fn at(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.width;
        self.amplitude * (-0.5 * u * u).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeatTemplate {
    pub label: Class,
    /// P wave, when present.
    pub p: Option<Wave>,
    /// Q, R, S, T and any further waves.
    pub waves: Vec<Wave>,
}

impl BeatTemplate {
    pub fn components(&self) -> impl Iterator<Item = &Wave> {
        self.p.iter().chain(&self.waves)
    }

    pub fn validate(&self) -> Result<()> {
        let lo = -(PRE_R as f64) / SAMPLE_RATE;
        let hi = (BEAT_LEN - PRE_R) as f64 / SAMPLE_RATE;
        for w in self.components() {
            if !(w.width > 0.0 && w.center >= lo && w.center <= hi && w.amplitude.is_finite()) {
                return Err(Error::invalid(format!("invalid wave {w:?} in {:?} template", self.label)));
            }
        }
        Ok(())
    }
}

/// N, S, V and F morphologies. S is narrow with a small inverted, early P;
/// V is wide and tall with no P and an inverted T; F sits between N and V.
pub fn default_templates() -> [BeatTemplate; 4] {
    let qrs = |r: Wave, s: Wave, t: Wave| vec![Wave::new(-0.025, 0.008, -0.12), r, s, t];
    [
        BeatTemplate {
            label: Class::N,
            p: Some(Wave::new(-0.20, 0.025, 0.15)),
            waves: qrs(Wave::new(0.0, 0.010, 1.0), Wave::new(0.025, 0.008, -0.25), Wave::new(0.28, 0.05, 0.30)),
        },
        BeatTemplate {
            label: Class::S,
            p: Some(Wave::new(-0.14, 0.020, -0.10)),
            waves: qrs(Wave::new(0.0, 0.009, 0.85), Wave::new(0.022, 0.008, -0.30), Wave::new(0.24, 0.045, 0.12)),
        },
        BeatTemplate {
            label: Class::V,
            p: None,
            waves: vec![Wave::new(0.0, 0.035, 1.4), Wave::new(0.06, 0.030, -0.5), Wave::new(0.30, 0.07, -0.4)],
        },
        BeatTemplate {
            label: Class::F,
            p: Some(Wave::new(-0.20, 0.025, 0.07)),
            waves: vec![
                Wave::new(-0.03, 0.012, -0.08),
                Wave::new(0.0, 0.022, 1.2),
                Wave::new(0.04, 0.020, -0.4),
                Wave::new(0.29, 0.06, -0.05),
            ],
        },
    ]
}

pub fn template_for(label: Class) -> BeatTemplate {
    default_templates().into_iter().find(|t| t.label == label).expect("every class has a template")
}

/// Relative standard deviations of per-wave amplitude and width, absolute
/// standard deviation of the wave centers (seconds) and additive noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jitter {
    pub amplitude: f64,
    pub width: f64,
    pub shift: f64,
    pub noise: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter { amplitude: 0.05, width: 0.05, shift: 0.004, noise: DEFAULT_NOISE }
    }
}

impl Jitter {
    pub const NONE: Jitter = Jitter { amplitude: 0.0, width: 0.0, shift: 0.0, noise: 0.0 };
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn jittered<R: Rng + ?Sized>(t: &BeatTemplate, j: &Jitter, rng: &mut R) -> Vec<Wave> {
    t.components()
        .map(|w| Wave {
            center: w.center + j.shift * gauss(rng),
            width: w.width * (1.0 + j.width * gauss(rng)).max(0.2),
            amplitude: w.amplitude * (1.0 + j.amplitude * gauss(rng)),
        })
        .collect()
}

/// One 320-sample beat with the R peak at sample 140.
pub fn render_beat<R: Rng + ?Sized>(t: &BeatTemplate, j: &Jitter, rng: &mut R) -> Vec<f64> {
    let waves = jittered(t, j, rng);
    (0..BEAT_LEN)
        .map(|i| {
            let time = (i as f64 - PRE_R as f64) / SAMPLE_RATE;
            let clean: f64 = waves.iter().map(|w| w.at(time)).sum();
            if j.noise > 0.0 {
                clean + j.noise * gauss(rng)
            } else {
                clean
            }
        })
        .collect()
}

/// Class proportions in [`Class::ALL`] order, summing to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mix(pub [f64; 4]);

impl Mix {
    pub const NORMAL: Mix = Mix([1.0, 0.0, 0.0, 0.0]);

    pub fn new(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!("mix proportions must be non-negative: {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("mix proportions sum to {sum}, expected 1")));
        }
        Ok(Mix(p))
    }

    /// Splits `n` by largest remainder, so the counts sum to exactly `n`.
    /// Ties go to the smaller class id.
    pub fn allocate(&self, n: usize) -> [usize; 4] {
        let exact: Vec<f64> = self.0.iter().map(|p| p * n as f64).collect();
        let mut counts = [0usize; 4];
        for (c, e) in counts.iter_mut().zip(&exact) {
            *c = e.floor() as usize;
        }
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let short = n - counts.iter().sum::<usize>();
        for &c in order.iter().filter(|&&c| self.0[c] > 0.0).cycle().take(short) {
            counts[c] += 1;
        }
        counts
    }
}

impl FromStr for Mix {
    type Err = Error;

    /// `N:0.9,V:0.05,S:0.04,F:0.01`; missing classes get 0.
    fn from_str(s: &str) -> Result<Self> {
        let mut p = [0.0; 4];
        for part in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) =
                part.split_once(':').ok_or_else(|| Error::invalid(format!("mix entry `{part}` is not CLASS:P")))?;
            let c = Class::from_token(k.trim()).ok_or_else(|| Error::invalid(format!("unknown class `{k}` in mix")))?;
            p[c.id()] = v.trim().parse().map_err(|_| Error::invalid(format!("bad proportion `{v}` in mix")))?;
        }
        Mix::new(p)
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Class::ALL.iter().map(|c| format!("{}:{}", c.token(), self.0[c.id()])).collect();
        f.write_str(&parts.join(","))
    }
}

/// `n` labeled beats with exact class counts from `mix`, in shuffled order.
pub fn synth_beats<R: Rng + ?Sized>(n: usize, mix: &Mix, j: &Jitter, rng: &mut R) -> Vec<BeatRecord> {
    let templates = default_templates();
    let mut labels: Vec<Class> =
        mix.allocate(n).iter().enumerate().flat_map(|(c, &k)| std::iter::repeat_n(Class::ALL[c], k)).collect();
    labels.shuffle(rng);
    labels
        .into_iter()
        .map(|c| BeatRecord {
            waveform: render_beat(&templates[c.id()], j, rng),
            label: c,
            record_id: "synth".into(),
            r_peak: PRE_R,
        })
        .collect()
}

/// Symbol written to annotation files for each class.
pub fn annotation_symbol(c: Class) -> &'static str {
    match c {
        Class::N => "N",
        Class::S => "A",
        Class::V => "V",
        Class::F => "F",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordingConfig {
    pub bpm: f64,
    pub duration_s: f64,
    pub mix: Mix,
    pub jitter: Jitter,
    /// Relative RR jitter, uniform in `±rr_jitter`.
    pub rr_jitter: f64,
    /// Baseline wander amplitude (mV) at 0.3 Hz; 0 disables it.
    pub wander: f64,
    pub record_id: String,
}

impl Default for RecordingConfig {
    fn default() -> Self {
        RecordingConfig {
            bpm: 60.0,
            duration_s: 60.0,
            mix: Mix::NORMAL,
            jitter: Jitter::default(),
            rr_jitter: 0.05,
            wander: 0.0,
            record_id: "900".into(),
        }
    }
}

/// A rendered recording with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthRecording {
    pub recording: EcgRecording,
    pub peaks: Vec<usize>,
    pub annotations: Vec<Annotation>,
}

const WANDER_HZ: f64 = 0.3;

/// Beats at RR intervals of `60/bpm · (1 ± rr_jitter)`, the first R peak half
/// an interval in. Stored as one 212-range ADC channel.
pub fn render_recording<R: Rng + ?Sized>(cfg: &RecordingConfig, rng: &mut R) -> Result<SynthRecording> {
    if !(30.0..=200.0).contains(&cfg.bpm) {
        return Err(Error::invalid(format!("bpm {} outside [30, 200]", cfg.bpm)));
    }
    let rr = 60.0 / cfg.bpm;
    if !(cfg.duration_s >= rr) {
        return Err(Error::invalid(format!("duration {} s is shorter than one beat ({rr} s)", cfg.duration_s)));
    }
    if !(0.0..0.5).contains(&cfg.rr_jitter) {
        return Err(Error::invalid(format!("rr_jitter {} outside [0, 0.5)", cfg.rr_jitter)));
    }
    let fs = SAMPLE_RATE;
    let n = (cfg.duration_s * fs).round() as usize;
    let templates = default_templates();
    let pick = WeightedIndex::new(cfg.mix.0).map_err(|e| Error::invalid(format!("mix: {e}")))?;
    let mut x = vec![0.0; n];
    let mut peaks = Vec::new();
    let mut annotations = Vec::new();
    let mut t = rr / 2.0;
    let support = (SUPPORT_S * fs) as isize;
    while (t * fs).round() < n as f64 {
        let r = (t * fs).round() as usize;
        let class = Class::ALL[pick.sample(rng)];
        let waves = jittered(&templates[class.id()], &cfg.jitter, rng);
        let lo = (r as isize - support).max(0) as usize;
        let hi = (r + support as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
            let time = (i as f64 - r as f64) / fs;
            *v += waves.iter().map(|w| w.at(time)).sum::<f64>();
        }
        peaks.push(r);
        annotations.push(Annotation::new(r, annotation_symbol(class)));
        t += rr * (1.0 + rng.gen_range(-cfg.rr_jitter..=cfg.rr_jitter));
    }
    let noise = Normal::new(0.0, cfg.jitter.noise.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let samples = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let wander = cfg.wander * (std::f64::consts::TAU * WANDER_HZ * i as f64 / fs + phase).sin();
            let mv = v + wander + noise.sample(rng);
            ((mv * ADC_GAIN).round() as i32 + ADC_ZERO).clamp(-2048, 2047)
        })
        .collect();
    let recording = EcgRecording {
        record_id: cfg.record_id.clone(),
        sample_rate: fs,
        signals: vec![Signal { description: "MLII".into(), gain: ADC_GAIN, adc_zero: ADC_ZERO, samples }],
    };
    Ok(SynthRecording { recording, peaks, annotations })
}
