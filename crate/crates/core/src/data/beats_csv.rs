// Beat datasets as CSV: one beat per line, 320 values then a class token
// (N, S, V or F). Blank lines and lines starting with `#` are skipped.

use std::io::{BufRead, Write};

use super::{BeatRecord, Class};
use crate::error::{Error, Result};
use crate::BEAT_LEN;

/// Parses beats; every beat gets `source` as its record id.
pub fn read_csv_beats<R: BufRead>(reader: R, source: &str) -> Result<Vec<BeatRecord>> {
    let mut beats = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = t.split(',').map(str::trim).collect();
        if cols.len() != BEAT_LEN + 1 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {} columns, found {}", BEAT_LEN + 1, cols.len()),
            });
        }
        let label = Class::from_token(cols[BEAT_LEN])
            .ok_or_else(|| Error::Parse { line: ln, msg: format!("unknown label `{}`", cols[BEAT_LEN]) })?;
        let mut waveform = Vec::with_capacity(BEAT_LEN);
        for (j, c) in cols[..BEAT_LEN].iter().enumerate() {
            let v: f64 = c
                .parse()
                .map_err(|_| Error::Parse { line: ln, msg: format!("column {}: `{c}` is not a number", j + 1) })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: ln, msg: format!("column {}: non-finite value", j + 1) });
            }
            waveform.push(v);
        }
        beats.push(BeatRecord { waveform, label, record_id: source.to_string(), r_peak: 0 });
    }
    Ok(beats)
}

pub fn write_csv_beats<W: Write>(mut w: W, beats: &[BeatRecord]) -> Result<()> {
    let mut line = String::new();
    for b in beats {
        line.clear();
        for v in &b.waveform {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(b.label.token());
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}
