use super::fir::Biquad;
use crate::error::{Error, Result};

const BAND_LO: f64 = 5.0;
const BAND_HI: f64 = 15.0;
const WINDOW_S: f64 = 0.150;
const REFRACTORY_S: f64 = 0.200;
const T_WAVE_S: f64 = 0.360;
const LEARN_S: f64 = 2.0;
const REFINE_S: f64 = 0.050;
const SEARCH_BACK: f64 = 1.66;
const RR_HISTORY: usize = 8;

/// Intermediate signals of the detector, exposed for inspection.
#[derive(Clone, Debug, Default)]
pub struct QrsTrace {
    pub bandpassed: Vec<f64>,
    pub derivative: Vec<f64>,
    pub integrated: Vec<f64>,
}

/// R-peak sample indices in strictly increasing order.
pub fn pan_tompkins(signal: &[f64], sample_rate: f64) -> Result<Vec<usize>> {
    pan_tompkins_traced(signal, sample_rate).map(|(p, _)| p)
}

pub fn pan_tompkins_traced(signal: &[f64], fs: f64) -> Result<(Vec<usize>, QrsTrace)> {
    if !(fs > 2.0 * BAND_HI) {
        return Err(Error::invalid(format!("sample rate {fs} Hz too low for QRS detection")));
    }
    let learn = (LEARN_S * fs).round() as usize;
    if signal.len() < learn {
        return Err(Error::invalid(format!(
            "QRS detection needs at least {LEARN_S} s ({learn} samples), got {}",
            signal.len()
        )));
    }
    let n = signal.len();
    let center = (BAND_LO * BAND_HI).sqrt();
    let bp = Biquad::bandpass(center, center / (BAND_HI - BAND_LO), fs).filtfilt(signal, fs as usize);

    let mut der = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        der[i] = (2.0 * bp[i + 1] + bp[i + 2] - bp[i - 2] - 2.0 * bp[i - 1]) * fs / 8.0;
    }
    let half = ((WINDOW_S * fs).round() as usize) / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + der[i] * der[i];
    }
    let mwi: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(half), (i + half + 1).min(n));
            (prefix[b] - prefix[a]) / (2 * half + 1) as f64
        })
        .collect();

    let peak_max = mwi.iter().fold(0.0f64, |m, &v| m.max(v));
    let trace = QrsTrace { bandpassed: bp, derivative: der, integrated: mwi };
    if !(peak_max > 1e-12 * (1.0 + signal.iter().fold(0.0f64, |m, v| m.max(v.abs())))) {
        return Ok((Vec::new(), trace));
    }
    let cands = candidates(&trace.integrated, (REFRACTORY_S * fs).round() as usize);
    let r = detect(&trace, &cands, fs, learn);
    Ok((refine(&trace.bandpassed, &r, fs), trace))
}

/// Local maxima of the integrated signal that dominate their `±span`
/// neighbourhood (strictly to the left, weakly to the right).
fn candidates(mwi: &[f64], span: usize) -> Vec<usize> {
    let n = mwi.len();
    (1..n.saturating_sub(1))
        .filter(|&i| mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1])
        .filter(|&i| {
            let v = mwi[i];
            mwi[i.saturating_sub(span)..i].iter().all(|&u| u < v)
                && mwi[i + 1..(i + span + 1).min(n)].iter().all(|&u| u <= v)
        })
        .collect()
}

struct Levels {
    spk: f64,
    npk: f64,
}

impl Levels {
    fn threshold(&self) -> f64 {
        self.npk + 0.25 * (self.spk - self.npk)
    }
}

fn max_slope(der: &[f64], at: usize, half: usize) -> f64 {
    let (a, b) = (at.saturating_sub(half), (at + half + 1).min(der.len()));
    der[a..b].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn detect(t: &QrsTrace, cands: &[usize], fs: f64, learn: usize) -> Vec<usize> {
    let mwi = &t.integrated;
    let head = &mwi[..learn];
    let mut lv = Levels {
        spk: 0.25 * head.iter().fold(0.0f64, |m, &v| m.max(v)),
        npk: 0.5 * head.iter().sum::<f64>() / learn as f64,
    };
    let refractory = (REFRACTORY_S * fs).round() as usize;
    let t_wave = (T_WAVE_S * fs).round() as usize;
    let slope_half = ((WINDOW_S * fs).round() as usize) / 2;
    let mut qrs: Vec<usize> = Vec::new();
    let mut rr: Vec<usize> = Vec::new();
    let mut last_slope = 0.0;

    let accept = |c: usize, qrs: &mut Vec<usize>, rr: &mut Vec<usize>| {
        if let Some(&p) = qrs.last() {
            rr.push(c - p);
            if rr.len() > RR_HISTORY {
                rr.remove(0);
            }
        }
        qrs.push(c);
    };

    for (ci, &c) in cands.iter().enumerate() {
        if let (Some(&last), false) = (qrs.last(), rr.is_empty()) {
            let avg = rr.iter().sum::<usize>() as f64 / rr.len() as f64;
            if (c - last) as f64 > SEARCH_BACK * avg {
                let i2 = 0.5 * lv.threshold();
                let best = cands[..ci]
                    .iter()
                    .copied()
                    .filter(|&k| k > last + refractory && k + refractory <= c && mwi[k] > i2)
                    .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                if let Some(k) = best {
                    lv.spk = 0.25 * mwi[k] + 0.75 * lv.spk;
                    last_slope = max_slope(&t.derivative, k, slope_half);
                    accept(k, &mut qrs, &mut rr);
                }
            }
        }
        let v = mwi[c];
        if let Some(&last) = qrs.last() {
            if c < last + refractory {
                continue;
            }
        }
        if v > lv.threshold() {
            let slope = max_slope(&t.derivative, c, slope_half);
            let is_t_wave = qrs.last().is_some_and(|&last| c - last < t_wave && slope < 0.5 * last_slope);
            if is_t_wave {
                lv.npk = 0.125 * v + 0.875 * lv.npk;
                continue;
            }
            lv.spk = 0.125 * v + 0.875 * lv.spk;
            last_slope = slope;
            accept(c, &mut qrs, &mut rr);
        } else {
            lv.npk = 0.125 * v + 0.875 * lv.npk;
        }
    }
    qrs
}

/// Moves each detection to the band-passed maximum within ±50 ms and
/// enforces the refractory spacing, keeping the stronger of two close peaks.
fn refine(bp: &[f64], qrs: &[usize], fs: f64) -> Vec<usize> {
    let w = (REFINE_S * fs).round() as usize;
    let refractory = (REFRACTORY_S * fs).round() as usize;
    let mut peaks: Vec<usize> = qrs
        .iter()
        .map(|&c| {
            let (a, b) = (c.saturating_sub(w), (c + w + 1).min(bp.len()));
            (a..b).max_by(|&i, &j| bp[i].total_cmp(&bp[j]).then(j.cmp(&i))).unwrap_or(c)
        })
        .collect();
    peaks.sort_unstable();
    let mut out: Vec<usize> = Vec::with_capacity(peaks.len());
    for p in peaks {
        match out.last_mut() {
            Some(last) if p - *last < refractory => {
                if bp[p] > bp[*last] {
                    *last = p;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spike_train(n: usize, peaks: &[usize], fs: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                peaks
                    .iter()
                    .map(|&p| {
                        let t = (i as f64 - p as f64) / fs;
                        (-(t / 0.01).powi(2) / 2.0).exp()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn short_signal_rejected() {
        assert!(pan_tompkins(&vec![0.0; 700], 360.0).is_err());
    }

    #[test]
    fn flat_signal_has_no_peaks() {
        assert!(pan_tompkins(&vec![3.0; 3600], 360.0).unwrap().is_empty());
    }

    #[test]
    fn regular_spikes_are_found() {
        let fs = 360.0;
        let truth: Vec<usize> = (0..12).map(|k| 200 + k * 300).collect();
        let x = spike_train(3800, &truth, fs);
        let got = pan_tompkins(&x, fs).unwrap();
        assert_eq!(got.len(), truth.len(), "{got:?}");
        for (g, t) in got.iter().zip(&truth) {
            assert!(g.abs_diff(*t) <= 2, "{g} vs {t}");
        }
    }

    #[test]
    fn close_pair_yields_one_peak() {
        let fs = 360.0;
        let mut truth: Vec<usize> = (0..10).map(|k| 200 + k * 300).collect();
        truth.push(1436);
        truth.sort();
        let got = pan_tompkins(&spike_train(3400, &truth, fs), fs).unwrap();
        let near = got.iter().filter(|&&g| (1350..1500).contains(&g)).count();
        assert_eq!(near, 1, "{got:?}");
        for w in got.windows(2) {
            assert!(w[1] - w[0] >= 72);
        }
    }
}
