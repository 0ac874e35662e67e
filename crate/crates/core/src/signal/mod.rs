//! Baseline removal, QRS detection and beat segmentation.

mod fir;
mod qrs;

pub use fir::{
    apply_filter, design_highpass_fir, design_lowpass_fir, lfilter_fir, notch, Biquad, FirFilter, Window, NOTCH_Q,
};
pub use qrs::{pan_tompkins, pan_tompkins_traced, QrsTrace};

use crate::data::{is_beat_symbol, Annotation, BeatRecord, Class};
use crate::error::{Error, Result};
use crate::BEAT_LEN;

/// Samples kept before the R peak; the rest of the window follows it.
pub const PRE_R: usize = 140;
pub const POST_R: usize = BEAT_LEN - PRE_R;
/// Largest distance between a detected peak and its annotation.
pub const MATCH_TOLERANCE: usize = 50;

pub const DEFAULT_HIGHPASS_HZ: f64 = 0.5;
pub const DEFAULT_TAPS: usize = 301;

/// Why detected peaks produced no beat.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SegmentDrops {
    /// Window would cross the recording boundary.
    pub boundary: usize,
    /// No beat annotation within tolerance, or its symbol has no class.
    pub unlabeled: usize,
}

impl SegmentDrops {
    pub fn total(&self) -> usize {
        self.boundary + self.unlabeled
    }
}

/// Cuts `[r − 140, r + 180)` around each peak and labels it with the nearest
/// beat annotation within ±50 samples. Every peak either yields a beat or is
/// counted in the returned drops.
pub fn segment_beats(
    signal: &[f64],
    peaks: &[usize],
    annotations: &[Annotation],
    record_id: &str,
) -> Result<(Vec<BeatRecord>, SegmentDrops)> {
    if peaks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("peaks must be strictly increasing"));
    }
    let mut anns: Vec<&Annotation> = annotations.iter().filter(|a| is_beat_symbol(&a.symbol)).collect();
    anns.sort_by_key(|a| a.sample);
    let mut beats = Vec::new();
    let mut drops = SegmentDrops::default();
    for &r in peaks {
        if r < PRE_R || r + POST_R > signal.len() {
            drops.boundary += 1;
            continue;
        }
        let Some(label) = nearest_label(&anns, r) else {
            drops.unlabeled += 1;
            continue;
        };
        beats.push(BeatRecord::new(signal[r - PRE_R..r + POST_R].to_vec(), label, record_id, r)?);
    }
    Ok((beats, drops))
}

fn nearest_label(anns: &[&Annotation], r: usize) -> Option<Class> {
    let i = anns.partition_point(|a| a.sample < r);
    let lo = i.checked_sub(1).map(|j| anns[j]);
    let hi = anns.get(i).copied();
    let best = match (lo, hi) {
        (Some(a), Some(b)) => Some(if r - a.sample <= b.sample - r { a } else { b }),
        (a, b) => a.or(b),
    }?;
    (best.sample.abs_diff(r) <= MATCH_TOLERANCE).then(|| best.class()).flatten()
}

/// Z-normalization with the population variance; a constant beat maps to
/// zeros.
pub fn normalize_beat(beat: &[f64]) -> Vec<f64> {
    let n = beat.len() as f64;
    if beat.is_empty() {
        return Vec::new();
    }
    let mean = beat.iter().sum::<f64>() / n;
    let var = beat.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= 1e-12 * (1.0 + mean.abs()) {
        return vec![0.0; beat.len()];
    }
    beat.iter().map(|v| (v - mean) / sd).collect()
}

/// Settings of the recording-to-beats pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct PrepConfig {
    pub highpass_hz: f64,
    pub taps: usize,
    pub notch_hz: Option<f64>,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig { highpass_hz: DEFAULT_HIGHPASS_HZ, taps: DEFAULT_TAPS, notch_hz: None }
    }
}

/// Filters the first lead, detects peaks and segments labeled beats.
pub fn prepare_recording(
    rec: &crate::data::EcgRecording,
    annotations: &[Annotation],
    cfg: &PrepConfig,
) -> Result<(Vec<BeatRecord>, SegmentDrops)> {
    let fs = rec.sample_rate;
    let gain = rec.signals.first().map_or(1.0, |s| if s.gain > 0.0 { s.gain } else { 1.0 });
    let zero = rec.signals.first().map_or(0, |s| s.adc_zero) as f64;
    let mv: Vec<f64> = rec.lead().iter().map(|v| (v - zero) / gain).collect();
    let filter = design_highpass_fir(cfg.highpass_hz, fs, cfg.taps)?;
    let mut x = apply_filter(&filter, &mv)?;
    if let Some(f) = cfg.notch_hz {
        x = notch(&x, f, fs)?;
    }
    let peaks = pan_tompkins(&x, fs)?;
    segment_beats(&x, &peaks, annotations, &rec.record_id)
}
