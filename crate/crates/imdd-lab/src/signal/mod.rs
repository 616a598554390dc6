//! Deterministic signal generation, shaping, transforms, and spectral
//! estimation shared by every other module.

mod prbs;
mod pulse;
mod spectrum;
mod waveform;

pub use prbs::generate_prbs;
pub use pulse::{raised_cosine, PulseShape};
pub use spectrum::{band_energy_fraction, dft, fft_grid, idft, psd_estimate};
pub use waveform::{BitSequence, Waveform};

use crate::error::{Error, Result};

/// Maps bits to OOK symbol levels: 0 -> 0.0, 1 -> 1.0, one sample per
/// symbol, sample rate equal to the baud rate.
pub fn map_ook(bits: &BitSequence, baud: f64) -> Result<Waveform> {
    if !(baud > 0.0) {
        return Err(Error::invalid(format!("baud rate must be positive, got {baud}")));
    }
    let samples = bits.bits().iter().map(|&b| f64::from(b)).collect();
    Waveform::from_real(samples, baud)
}

/// Zero-insertion upsampling: output[n*sps] = input[n], other samples 0.
/// The sample rate is multiplied by `sps`.
pub fn upsample(symbols: &Waveform, sps: usize) -> Result<Waveform> {
    if sps < 1 {
        return Err(Error::invalid("upsampling factor must be at least 1"));
    }
    let mut samples = vec![num_complex::Complex64::new(0.0, 0.0); symbols.len() * sps];
    for (n, &s) in symbols.samples().iter().enumerate() {
        samples[n * sps] = s;
    }
    Waveform::new(samples, symbols.sample_rate() * sps as f64)
}

/// Linear convolution with the filter's reference delay removed, so sample
/// n of the output corresponds to sample n of the input. Boundaries are
/// zero-padded; output length equals input length.
pub fn convolve_same(x: &Waveform, taps: &[f64], delay: usize) -> Result<Waveform> {
    if taps.is_empty() {
        return Err(Error::invalid("filter taps must be non-empty"));
    }
    if delay >= taps.len() {
        return Err(Error::invalid(format!(
            "reference delay {delay} outside tap range 0..{}",
            taps.len(),
        )));
    }
    let n = x.len();
    let xs = x.samples();
    let mut out = vec![num_complex::Complex64::new(0.0, 0.0); n];
    for (k, &t) in taps.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        // y[n] = sum_k taps[k] * x[n + delay - k]; one of dst_lo/src_lo is 0.
        let shift = delay as i64 - k as i64;
        let (dst_lo, src_lo) =
            if shift >= 0 { (0usize, shift as usize) } else { ((-shift) as usize, 0usize) };
        if dst_lo + src_lo >= n {
            continue;
        }
        let len = n - dst_lo - src_lo;
        for i in 0..len {
            out[dst_lo + i] += xs[src_lo + i] * t;
        }
    }
    Waveform::new(out, x.sample_rate())
}

/// Full transmit-side shaping: map bits to OOK, upsample, apply a
/// raised-cosine pulse with the filter delay removed.
pub fn shape_ook(
    bits: &BitSequence,
    baud: f64,
    sps: usize,
    span_symbols: usize,
    rolloff: f64,
) -> Result<Waveform> {
    let symbols = map_ook(bits, baud)?;
    let up = upsample(&symbols, sps)?;
    let pulse = raised_cosine(rolloff, span_symbols, sps)?;
    convolve_same(&up, pulse.taps(), pulse.center())
}
