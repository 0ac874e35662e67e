//! WFDB records: `.hea` headers, format-212 signal files and MIT-format
//! `.atr` annotation files.
//!
//! Format 212 packs two 12-bit two's-complement samples into three bytes:
//!
//! ```text
//! s1 = b0 | (b1 & 0x0F) << 8
//! s2 = b2 | (b1 & 0xF0) << 4
//! ```
//!
//! Samples of all signals are interleaved frame by frame.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Annotation, EcgRecording, Signal};
use crate::error::{Error, Result};

fn sign12(v: u16) -> i32 {
    let v = (v & 0x0FFF) as i32;
    if v & 0x800 != 0 {
        v - 0x1000
    } else {
        v
    }
}

/// Decodes a 212 byte stream into a flat sample sequence.
pub fn decode_212(bytes: &[u8]) -> Result<Vec<i32>> {
    if !bytes.len().is_multiple_of(3) {
        return Err(Error::Format {
            offset: bytes.len() - bytes.len() % 3,
            msg: format!("truncated 3-byte group ({} trailing bytes)", bytes.len() % 3),
        });
    }
    let mut out = Vec::with_capacity(bytes.len() / 3 * 2);
    for g in bytes.chunks_exact(3) {
        let (b0, b1, b2) = (g[0] as u16, g[1] as u16, g[2] as u16);
        out.push(sign12(b0 | (b1 & 0x0F) << 8));
        out.push(sign12(b2 | (b1 & 0xF0) << 4));
    }
    Ok(out)
}

/// Encodes samples in `[-2048, 2047]`; an odd count is padded with a zero.
pub fn encode_212(samples: &[i32]) -> Result<Vec<u8>> {
    if let Some((i, v)) = samples.iter().enumerate().find(|(_, v)| !(-2048..=2047).contains(*v)) {
        return Err(Error::invalid(format!("sample {i} = {v} does not fit in 12 bits")));
    }
    let mut out = Vec::with_capacity(samples.len().div_ceil(2) * 3);
    for pair in samples.chunks(2) {
        let s1 = (pair[0] & 0x0FFF) as u16;
        let s2 = (pair.get(1).copied().unwrap_or(0) & 0x0FFF) as u16;
        out.push((s1 & 0xFF) as u8);
        out.push((((s1 >> 8) & 0x0F) | ((s2 >> 4) & 0xF0)) as u8);
        out.push((s2 & 0xFF) as u8);
    }
    Ok(out)
}

/// Parsed `.hea` content for a single-file, format-212 record.
#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub record_id: String,
    pub sample_rate: f64,
    pub num_samples: Option<usize>,
    pub signals: Vec<SignalSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalSpec {
    pub file_name: String,
    pub gain: f64,
    pub adc_zero: i32,
    pub description: String,
}

const DEFAULT_GAIN: f64 = 200.0;

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad {what} `{tok}`") })
}

impl Header {
    pub fn parse(text: &str) -> Result<Header> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, record) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty header".into() })?;
        let toks: Vec<&str> = record.split_whitespace().collect();
        if toks.len() < 2 {
            return Err(Error::Parse { line: ln, msg: "record line needs a name and a signal count".into() });
        }
        let record_id = toks[0].split('/').next().unwrap_or(toks[0]).to_string();
        let nsig: usize = parse_num(toks[1], ln, "signal count")?;
        let sample_rate = match toks.get(2) {
            Some(t) => parse_num(t.split(['/', '(']).next().unwrap_or(t), ln, "sampling frequency")?,
            None => 250.0,
        };
        let num_samples = toks.get(3).map(|t| parse_num(t, ln, "sample count")).transpose()?;
        if toks.len() > 6 {
            log::warn!("header line {ln}: ignoring {} extra record fields", toks.len() - 6);
        }

        let mut signals = Vec::with_capacity(nsig);
        for _ in 0..nsig {
            let (ln, line) =
                lines.next().ok_or(Error::Parse { line: ln, msg: format!("expected {nsig} signal lines") })?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 2 {
                return Err(Error::Parse { line: ln, msg: "signal line needs a file name and format".into() });
            }
            let format = toks[1].split(['x', ':', '+']).next().unwrap_or(toks[1]);
            if format != "212" {
                return Err(Error::Parse { line: ln, msg: format!("unsupported signal format `{}`", toks[1]) });
            }
            let gain = match toks.get(2) {
                Some(t) => {
                    let g: f64 = parse_num(t.split(['(', '/']).next().unwrap_or(t), ln, "gain")?;
                    if g == 0.0 {
                        DEFAULT_GAIN
                    } else {
                        g
                    }
                }
                None => DEFAULT_GAIN,
            };
            let adc_zero = toks.get(4).map(|t| parse_num(t, ln, "ADC zero")).transpose()?.unwrap_or(0);
            let description = if toks.len() > 8 { toks[8..].join(" ") } else { String::new() };
            signals.push(SignalSpec { file_name: toks[0].to_string(), gain, adc_zero, description });
        }
        if let Some(f) = signals.first() {
            if signals.iter().any(|s| s.file_name != f.file_name) {
                return Err(Error::Parse {
                    line: ln,
                    msg: "signals spread over several files are not supported".into(),
                });
            }
        }
        for (ln, _) in lines {
            log::warn!("header line {ln}: ignoring unrecognized content");
        }
        Ok(Header { record_id, sample_rate, num_samples, signals })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}", self.record_id, self.signals.len(), self.sample_rate);
        if let Some(n) = self.num_samples {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
        for sig in &self.signals {
            let _ = writeln!(s, "{} 212 {} 11 {} 0 0 0 {}", sig.file_name, sig.gain, sig.adc_zero, sig.description);
        }
        s
    }
}

/// Decodes a record from its header text and 212 signal bytes.
pub fn read_wfdb_212(signal_bytes: &[u8], header: &str) -> Result<EcgRecording> {
    let h = Header::parse(header)?;
    let nsig = h.signals.len();
    if nsig == 0 {
        return Err(Error::Parse { line: 1, msg: "record has no signals".into() });
    }
    let flat = decode_212(signal_bytes)?;
    let frames = h.num_samples.unwrap_or(flat.len() / nsig);
    if frames * nsig > flat.len() {
        return Err(Error::Format {
            offset: signal_bytes.len(),
            msg: format!("header declares {frames} frames, file holds {}", flat.len() / nsig),
        });
    }
    let signals = h
        .signals
        .iter()
        .enumerate()
        .map(|(c, spec)| Signal {
            description: spec.description.clone(),
            gain: spec.gain,
            adc_zero: spec.adc_zero,
            samples: (0..frames).map(|f| flat[f * nsig + c]).collect(),
        })
        .collect();
    Ok(EcgRecording { record_id: h.record_id, sample_rate: h.sample_rate, signals })
}

/// Header text and 212 bytes for a recording; the signal file is named
/// `{record_id}.dat`.
pub fn write_wfdb_212(rec: &EcgRecording) -> Result<(String, Vec<u8>)> {
    let n = rec.len();
    if rec.signals.iter().any(|s| s.samples.len() != n) {
        return Err(Error::invalid("all signals of a recording must have equal length"));
    }
    let nsig = rec.signals.len();
    let mut flat = Vec::with_capacity(n * nsig);
    for f in 0..n {
        flat.extend(rec.signals.iter().map(|s| s.samples[f]));
    }
    let header = Header {
        record_id: rec.record_id.clone(),
        sample_rate: rec.sample_rate,
        num_samples: Some(n),
        signals: rec
            .signals
            .iter()
            .map(|s| SignalSpec {
                file_name: format!("{}.dat", rec.record_id),
                gain: s.gain,
                adc_zero: s.adc_zero,
                description: s.description.clone(),
            })
            .collect(),
    };
    Ok((header.to_text(), encode_212(&flat)?))
}

/// Loads `{dir}/{id}.hea`, its signal file and, when present, `{dir}/{id}.atr`.
pub fn load_record(dir: &Path, id: &str) -> Result<(EcgRecording, Vec<Annotation>)> {
    let header = fs::read_to_string(dir.join(format!("{id}.hea")))?;
    let h = Header::parse(&header)?;
    let file = h.signals.first().map_or_else(|| format!("{id}.dat"), |s| s.file_name.clone());
    let rec = read_wfdb_212(&fs::read(dir.join(file))?, &header)?;
    let atr = dir.join(format!("{id}.atr"));
    let ann = if atr.exists() { read_atr(&fs::read(atr)?)? } else { Vec::new() };
    Ok((rec, ann))
}

pub fn save_record(dir: &Path, rec: &EcgRecording, ann: &[Annotation]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (header, bytes) = write_wfdb_212(rec)?;
    fs::write(dir.join(format!("{}.hea", rec.record_id)), header)?;
    fs::write(dir.join(format!("{}.dat", rec.record_id)), bytes)?;
    fs::write(dir.join(format!("{}.atr", rec.record_id)), write_atr(ann)?)?;
    Ok(())
}

// MIT annotation codes 1..=41, index = code.
const CODES: [&str; 42] = [
    "", "N", "L", "R", "a", "V", "F", "J", "A", "S", "E", "j", "/", "Q", "~", "", "|", "", "s", "T", "*", "D", "\"",
    "=", "p", "B", "^", "t", "+", "u", "?", "!", "[", "]", "e", "n", "@", "x", "f", "(", ")", "r",
];
const SKIP: u16 = 59;
const NUM: u16 = 60;
const SUB: u16 = 61;
const CHN: u16 = 62;
const AUX: u16 = 63;

/// Parses an MIT-format annotation file. Only time and type are kept.
pub fn read_atr(bytes: &[u8]) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    let mut t: i64 = 0;
    let mut pos = 0;
    let word = |p: usize| -> Result<u16> {
        bytes
            .get(p..p + 2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .ok_or(Error::Format { offset: p, msg: "truncated annotation word".into() })
    };
    while pos + 1 < bytes.len() {
        let w = word(pos)?;
        let (code, field) = (w >> 10, w & 0x03FF);
        pos += 2;
        match code {
            0 if field == 0 => break,
            SKIP => {
                let hi = word(pos)? as u32;
                let lo = word(pos + 2)? as u32;
                t += ((hi << 16) | lo) as i32 as i64;
                pos += 4;
            }
            NUM | SUB | CHN => {}
            AUX => pos += (field as usize).div_ceil(2) * 2,
            _ => {
                t += field as i64;
                let sym = CODES.get(code as usize).copied().unwrap_or("");
                if t < 0 {
                    return Err(Error::Format { offset: pos - 2, msg: "annotation time before record start".into() });
                }
                out.push(Annotation::new(t as usize, if sym.is_empty() { "?" } else { sym }));
            }
        }
    }
    Ok(out)
}

/// Writes annotations (sorted by sample) in MIT format.
pub fn write_atr(ann: &[Annotation]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut t = 0usize;
    for a in ann {
        let code = CODES
            .iter()
            .position(|&s| !s.is_empty() && s == a.symbol)
            .ok_or_else(|| Error::invalid(format!("no MIT code for symbol `{}`", a.symbol)))? as u16;
        let delta = a.sample.checked_sub(t).ok_or_else(|| Error::invalid("annotations must be sorted by sample"))?;
        if delta > 0x03FF {
            let d = delta as u32;
            out.extend_from_slice(&(SKIP << 10).to_le_bytes());
            out.extend_from_slice(&((d >> 16) as u16).to_le_bytes());
            out.extend_from_slice(&((d & 0xFFFF) as u16).to_le_bytes());
            out.extend_from_slice(&(code << 10).to_le_bytes());
        } else {
            out.extend_from_slice(&((code << 10) | delta as u16).to_le_bytes());
        }
        t = a.sample;
    }
    out.extend_from_slice(&[0, 0]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_reference_triplets() {
        assert_eq!(decode_212(&[0x01, 0x00, 0x02]).unwrap(), vec![1, 2]);
        assert_eq!(decode_212(&[0xFF, 0x0F, 0x00]).unwrap(), vec![-1, 0]);
        assert_eq!(decode_212(&[0x00, 0x80, 0x00]).unwrap(), vec![0, -2048]);
    }

    #[test]
    fn truncated_group_reports_offset() {
        match decode_212(&[1, 2, 3, 4]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn encode_rejects_wide_values() {
        assert!(encode_212(&[2048]).is_err());
        assert_eq!(encode_212(&[-2048, 2047]).unwrap().len(), 3);
    }

    #[test]
    fn header_roundtrip_and_mit_style() {
        let text = "100 2 360 650000 0:0:0 0/0/0\n100.dat 212 200 11 1024 995 -22131 0 MLII\n100.dat 212 200 11 1024 1011 20052 0 V5\n# Age: 69\n";
        let h = Header::parse(text).unwrap();
        assert_eq!(h.record_id, "100");
        assert_eq!(h.sample_rate, 360.0);
        assert_eq!(h.num_samples, Some(650000));
        assert_eq!(h.signals[0].description, "MLII");
        assert_eq!(h.signals[1].adc_zero, 1024);
        assert_eq!(Header::parse(&h.to_text()).unwrap(), h);
    }

    #[test]
    fn unsupported_format_rejected() {
        assert!(Header::parse("x 1 360 10\nx.dat 16 200 16 0\n").is_err());
    }

    #[test]
    fn atr_roundtrip_with_long_gap() {
        let ann = vec![
            Annotation::new(5, "+"),
            Annotation::new(370, "N"),
            Annotation::new(5000, "V"),
            Annotation::new(5001, "F"),
        ];
        assert_eq!(read_atr(&write_atr(&ann).unwrap()).unwrap(), ann);
    }
}
