//! Discrete Fourier transforms and averaged-periodogram spectral estimation.
//!
//! Transform convention: the forward DFT is unnormalized, the inverse
//! carries the 1/N factor, so idft(dft(x)) = x and Parseval reads
//! sum |x|^2 = (1/N) sum |X|^2.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::waveform::Waveform;
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward DFT, unnormalized.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut buf = x.to_vec();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(&mut buf));
    buf
}

/// Inverse DFT, scaled by 1/N so idft(dft(x)) = x.
pub fn idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    if spectrum.is_empty() {
        return Vec::new();
    }
    let mut buf = spectrum.to_vec();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(&mut buf));
    let scale = 1.0 / buf.len() as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Two-sided DFT bin frequencies in Hz, ordered to match the transform
/// output: [0, fs/n, ..., then the negative branch].
pub fn fft_grid(n: usize, sample_rate: f64) -> Vec<f64> {
    let step = sample_rate / n as f64;
    (0..n)
        .map(|k| {
            if k <= (n - 1) / 2 {
                k as f64 * step
            } else {
                (k as i64 - n as i64) as f64 * step
            }
        })
        .collect()
}

/// Hann-windowed averaged periodogram (50%-overlap Welch form when
/// `overlap` = 0.5). Returns a one-sided (frequency, density) pair whose
/// integral over the grid equals the mean signal power, window-corrected.
pub fn psd_estimate(
    x: &Waveform,
    segment_len: usize,
    overlap: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let xs = x.to_real()?;
    if segment_len < 2 {
        return Err(Error::invalid("PSD segment length must be at least 2"));
    }
    if segment_len > xs.len() {
        return Err(Error::invalid(format!(
            "PSD segment length {segment_len} exceeds signal length {}",
            xs.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap must be in [0, 1), got {overlap}")));
    }
    let fs = x.sample_rate();
    let l = segment_len;
    let hop = (l - (overlap * l as f64).floor() as usize).max(1);

    // Periodic Hann window; u = sum w^2 is the power-gain correction.
    let window: Vec<f64> = (0..l)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / l as f64).cos()))
        .collect();
    let u: f64 = window.iter().map(|w| w * w).sum();

    let n_one = l / 2 + 1;
    let mut acc = vec![0.0; n_one];
    let mut n_segments = 0usize;
    let mut start = 0usize;
    while start + l <= xs.len() {
        let seg: Vec<Complex64> = xs[start..start + l]
            .iter()
            .zip(&window)
            .map(|(&v, &w)| Complex64::new(v * w, 0.0))
            .collect();
        let spec = dft(&seg);
        // Fold the two-sided periodogram onto [0, fs/2].
        acc[0] += spec[0].norm_sqr();
        for k in 1..n_one {
            let mut p = spec[k].norm_sqr();
            if k != l - k {
                p += spec[l - k].norm_sqr();
            }
            acc[k] += p;
        }
        n_segments += 1;
        start += hop;
    }
    let scale = 1.0 / (fs * u * n_segments as f64);
    let psd: Vec<f64> = acc.iter().map(|p| p * scale).collect();
    let grid: Vec<f64> = (0..n_one).map(|k| k as f64 * fs / l as f64).collect();
    Ok((grid, psd))
}

/// Fraction of total one-sided PSD power falling in [f_lo, f_hi). The
/// Nyquist bin is included when f_hi reaches sample_rate/2, so a partition
/// of [0, fs/2] into disjoint bands sums to exactly 1.
pub fn band_energy_fraction(x: &Waveform, f_lo: f64, f_hi: f64) -> Result<f64> {
    let nyquist = x.sample_rate() / 2.0;
    if !(0.0..nyquist).contains(&f_lo) || f_hi <= f_lo || f_hi > nyquist * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "band [{f_lo}, {f_hi}] must satisfy 0 <= f_lo < f_hi <= {nyquist}"
        )));
    }
    let segment = 1024.min(x.len());
    let (grid, psd) = psd_estimate(x, segment, 0.5)?;
    let total: f64 = psd.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("signal has zero power; band fraction undefined"));
    }
    let include_top = f_hi >= nyquist;
    let last = grid.len() - 1;
    let band: f64 = grid
        .iter()
        .zip(&psd)
        .enumerate()
        .filter(|(k, (&f, _))| (f >= f_lo && f < f_hi) || (include_top && *k == last))
        .map(|(_, (_, &p))| p)
        .sum();
    Ok(band / total)
}
