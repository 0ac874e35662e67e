//! Recordings, annotations and segmented beats, plus their file formats.

mod beats_csv;
pub mod wfdb;

pub use beats_csv::{read_csv_beats, write_csv_beats};

use crate::BEAT_LEN;

/// Beat classes. The discriminant is the class id used in files and models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    N = 0,
    S = 1,
    V = 2,
    F = 3,
}

impl Class {
    pub const ALL: [Class; 4] = [Class::N, Class::S, Class::V, Class::F];
    /// Arrhythmia classes handled by the second level, in model order.
    pub const ABNORMAL: [Class; 3] = [Class::S, Class::V, Class::F];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Class> {
        Class::ALL.get(id).copied()
    }

    pub fn token(self) -> &'static str {
        match self {
            Class::N => "N",
            Class::S => "S",
            Class::V => "V",
            Class::F => "F",
        }
    }

    pub fn from_token(t: &str) -> Option<Class> {
        Class::ALL.into_iter().find(|c| c.token() == t)
    }

    /// AAMI grouping of annotation symbols: `N L R e j` → N, `S A a J` → S,
    /// `V E` → V, `F` → F. Everything else has no class.
    pub fn from_symbol(sym: &str) -> Option<Class> {
        match sym {
            "N" | "L" | "R" | "e" | "j" => Some(Class::N),
            "S" | "A" | "a" | "J" => Some(Class::S),
            "V" | "E" => Some(Class::V),
            "F" => Some(Class::F),
            _ => None,
        }
    }

    /// Position within [`Class::ABNORMAL`].
    pub fn abnormal_index(self) -> Option<usize> {
        Class::ABNORMAL.iter().position(|&c| c == self)
    }
}

/// Symbols that mark a beat (as opposed to rhythm, noise or comment
/// annotations).
pub fn is_beat_symbol(sym: &str) -> bool {
    matches!(
        sym,
        "N" | "L" | "R" | "B" | "A" | "a" | "J" | "S" | "V" | "r" | "F" | "e" | "j" | "n" | "E" | "/" | "f" | "Q" | "?"
    )
}

/// One digitized signal of a recording.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub description: String,
    /// ADC units per millivolt.
    pub gain: f64,
    pub adc_zero: i32,
    pub samples: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EcgRecording {
    pub record_id: String,
    pub sample_rate: f64,
    pub signals: Vec<Signal>,
}

impl EcgRecording {
    pub fn len(&self) -> usize {
        self.signals.first().map_or(0, |s| s.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First channel as floats (raw ADC counts).
    pub fn lead(&self) -> Vec<f64> {
        self.signals.first().map_or_else(Vec::new, |s| s.samples.iter().map(|&v| v as f64).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub sample: usize,
    pub symbol: String,
}

impl Annotation {
    pub fn new(sample: usize, symbol: impl Into<String>) -> Self {
        Annotation { sample, symbol: symbol.into() }
    }

    pub fn class(&self) -> Option<Class> {
        Class::from_symbol(&self.symbol)
    }
}

/// A 320-sample beat with its class and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct BeatRecord {
    pub waveform: Vec<f64>,
    pub label: Class,
    pub record_id: String,
    pub r_peak: usize,
}

impl BeatRecord {
    pub fn new(waveform: Vec<f64>, label: Class, record_id: impl Into<String>, r_peak: usize) -> crate::Result<Self> {
        if waveform.len() != BEAT_LEN {
            return Err(crate::Error::Dimension {
                op: "beat",
                axis: "length",
                expected: BEAT_LEN,
                found: waveform.len(),
            });
        }
        Ok(BeatRecord { waveform, label, record_id: record_id.into(), r_peak })
    }
}

/// Records excluded by default for poor signal quality.
pub const DEFAULT_EXCLUDED: [&str; 4] = ["102", "104", "107", "217"];

/// Drops recordings whose id is listed in `excluded`.
pub fn exclude_records(recordings: Vec<EcgRecording>, excluded: &[&str]) -> Vec<EcgRecording> {
    let had = recordings.len();
    let kept: Vec<EcgRecording> =
        recordings.into_iter().filter(|r| !excluded.contains(&r.record_id.as_str())).collect();
    if had > 0 && kept.is_empty() {
        log::warn!("all {had} recordings were excluded");
    }
    kept
}

/// Beat counts per class in [`Class::ALL`] order.
pub fn class_counts<'a>(labels: impl IntoIterator<Item = &'a Class>) -> [usize; 4] {
    let mut c = [0; 4];
    for l in labels {
        c[l.id()] += 1;
    }
    c
}
