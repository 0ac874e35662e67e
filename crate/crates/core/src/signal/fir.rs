use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Hamming,
}

/// Linear-phase FIR filter with its design record.
#[derive(Clone, Debug, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub cutoff_hz: f64,
    pub sample_rate: f64,
    pub window: Window,
}

fn hamming(n: usize, len: usize) -> f64 {
    0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos()
}

fn check_design(cutoff: f64, fs: f64, taps: usize) -> Result<()> {
    if !(fs > 0.0 && cutoff > 0.0 && cutoff < fs / 2.0) {
        return Err(Error::invalid(format!("cutoff {cutoff} Hz must lie strictly between 0 and fs/2 = {}", fs / 2.0)));
    }
    if taps < 3 || taps.is_multiple_of(2) {
        return Err(Error::invalid(format!("tap count must be odd and at least 3, got {taps}")));
    }
    Ok(())
}

/// Hamming-windowed sinc low-pass with unit DC gain.
pub fn design_lowpass_fir(cutoff_hz: f64, sample_rate: f64, taps: usize) -> Result<FirFilter> {
    check_design(cutoff_hz, sample_rate, taps)?;
    let fc = cutoff_hz / sample_rate;
    let mid = (taps / 2) as f64;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let m = n as f64 - mid;
            let sinc = if m == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * m).sin() / (PI * m) };
            sinc * hamming(n, taps)
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    Ok(FirFilter { taps: h, cutoff_hz, sample_rate, window: Window::Hamming })
}

/// High-pass by spectral inversion of the low-pass: `δ[n − M] − h_lp[n]`.
pub fn design_highpass_fir(cutoff_hz: f64, sample_rate: f64, taps: usize) -> Result<FirFilter> {
    let mut f = design_lowpass_fir(cutoff_hz, sample_rate, taps)?;
    f.taps.iter_mut().for_each(|v| *v = -*v);
    f.taps[taps / 2] += 1.0;
    Ok(f)
}

/// Causal convolution with zero initial state.
pub fn lfilter_fir(h: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (n, out) in y.iter_mut().enumerate() {
        let k_max = h.len().min(n + 1);
        *out = (0..k_max).map(|k| h[k] * x[n - k]).sum();
    }
    y
}

/// Odd (point-symmetric) extension by `pad` samples on both ends.
fn odd_extend(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    out.extend_from_slice(x);
    out.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    out
}

fn forward_backward(x: &[f64], pad: usize, pass: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let ext = odd_extend(x, pad);
    let mut y = pass(&ext);
    y.reverse();
    let mut y = pass(&y);
    y.reverse();
    y[pad..pad + x.len()].to_vec()
}

/// Zero-phase application: filter forward, then backward, over an odd
/// extension of `3·(taps − 1)` samples per side. The effective response is
/// the autocorrelation of the taps.
pub fn apply_filter(filter: &FirFilter, signal: &[f64]) -> Result<Vec<f64>> {
    let l = filter.taps.len();
    if signal.len() < 3 * l {
        return Err(Error::invalid(format!("signal of {} samples is shorter than 3 x {l} taps", signal.len())));
    }
    let pad = (3 * (l - 1)).min(signal.len() - 1);
    Ok(forward_backward(signal, pad, |v| lfilter_fir(&filter.taps, v)))
}

/// Second-order IIR section `b / a` with `a[0] = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Band-pass with 0 dB peak at `center` and quality factor `q`.
    pub fn bandpass(center: f64, q: f64, fs: f64) -> Biquad {
        let w0 = 2.0 * PI * center / fs;
        let alpha = w0.sin() / (2.0 * q);
        Biquad::normalized([alpha, 0.0, -alpha], [1.0 + alpha, -2.0 * w0.cos(), 1.0 - alpha])
    }

    /// Notch at `center` with quality factor `q`.
    pub fn notch(center: f64, q: f64, fs: f64) -> Biquad {
        let w0 = 2.0 * PI * center / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = -2.0 * w0.cos();
        Biquad::normalized([1.0, c, 1.0], [1.0 + alpha, c, 1.0 - alpha])
    }

    fn normalized(b: [f64; 3], a: [f64; 3]) -> Biquad {
        Biquad { b: b.map(|v| v / a[0]), a: [1.0, a[1] / a[0], a[2] / a[0]] }
    }

    pub fn lfilter(&self, x: &[f64]) -> Vec<f64> {
        let (b, a) = (self.b, self.a);
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = b[0] * x0 + b[1] * x1 + b[2] * x2 - a[1] * y1 - a[2] * y2;
                (x2, x1, y2, y1) = (x1, x0, y1, y0);
                y0
            })
            .collect()
    }

    /// Zero-phase forward-backward application with an odd extension of up
    /// to `pad` samples.
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Vec<f64> {
        if x.len() < 2 {
            return x.to_vec();
        }
        forward_backward(x, pad.min(x.len() - 1), |v| self.lfilter(v))
    }
}

pub const NOTCH_Q: f64 = 30.0;

/// Zero-phase notch, e.g. at the 60 Hz mains frequency.
pub fn notch(signal: &[f64], center_hz: f64, sample_rate: f64) -> Result<Vec<f64>> {
    if !(center_hz > 0.0 && center_hz < sample_rate / 2.0) {
        return Err(Error::invalid(format!("notch frequency {center_hz} Hz outside (0, fs/2)")));
    }
    let pad = sample_rate as usize;
    Ok(Biquad::notch(center_hz, NOTCH_Q, sample_rate).filtfilt(signal, pad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_taps_and_bad_cutoff_rejected() {
        assert!(design_highpass_fir(0.5, 360.0, 300).is_err());
        assert!(design_highpass_fir(0.0, 360.0, 301).is_err());
        assert!(design_highpass_fir(180.0, 360.0, 301).is_err());
    }

    #[test]
    fn highpass_taps_are_symmetric_with_zero_dc() {
        let f = design_highpass_fir(0.5, 360.0, 301).unwrap();
        let n = f.taps.len();
        for i in 0..n {
            assert!((f.taps[i] - f.taps[n - 1 - i]).abs() < 1e-15);
        }
        assert!(f.taps.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn short_signal_rejected() {
        let f = design_highpass_fir(0.5, 360.0, 301).unwrap();
        assert!(apply_filter(&f, &vec![0.0; 902]).is_err());
        assert!(apply_filter(&f, &vec![0.0; 903]).is_ok());
    }

    #[test]
    fn filter_is_linear() {
        let f = design_highpass_fir(0.5, 360.0, 31).unwrap();
        let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin() + 0.01 * i as f64).collect();
        let ax: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let y = apply_filter(&f, &x).unwrap();
        let ya = apply_filter(&f, &ax).unwrap();
        for (a, b) in y.iter().zip(&ya) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn notch_removes_mains_tone() {
        let fs = 360.0;
        let x: Vec<f64> = (0..3600).map(|i| (2.0 * PI * 60.0 * i as f64 / fs).sin()).collect();
        let y = notch(&x, 60.0, fs).unwrap();
        let peak = y[500..3100].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak < 0.01, "residual {peak}");
    }
}
