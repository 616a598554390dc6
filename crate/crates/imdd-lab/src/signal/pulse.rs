//! Raised-cosine pulse shaping.

use crate::error::{Error, Result};

/// A symmetric FIR pulse-shaping filter sampled at `sps` samples per symbol
/// over `span_symbols` symbols (tap count = span_symbols * sps + 1). Taps are
/// normalized so the center tap equals 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    taps: Vec<f64>,
    span_symbols: usize,
    sps: usize,
    rolloff: f64,
}

impl PulseShape {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Index of the center (peak) tap; also the reference delay for
    /// delay-removed convolution.
    pub fn center(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn span_symbols(&self) -> usize {
        self.span_symbols
    }

    pub fn sps(&self) -> usize {
        self.sps
    }

    pub fn rolloff(&self) -> f64 {
        self.rolloff
    }
}

/// Normalized sinc: sin(pi x) / (pi x).
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Raised-cosine impulse response at time t (in symbol periods), with the
/// singularities resolved by their analytic limits.
fn rc_value(t: f64, rolloff: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if rolloff > 0.0 {
        let denom = 1.0 - (2.0 * rolloff * t).powi(2);
        if denom.abs() < 1e-12 {
            // limit at t = +-T/(2 rolloff)
            return std::f64::consts::FRAC_PI_4 * sinc(1.0 / (2.0 * rolloff));
        }
        sinc(t) * (std::f64::consts::PI * rolloff * t).cos() / denom
    } else {
        sinc(t)
    }
}

/// Time-domain raised-cosine filter. `span_symbols` must be even so the
/// filter is symmetric about an integer center tap.
pub fn raised_cosine(rolloff: f64, span_symbols: usize, sps: usize) -> Result<PulseShape> {
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(Error::invalid(format!("rolloff must be in [0, 1], got {rolloff}")));
    }
    if span_symbols == 0 || !span_symbols.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "pulse span must be a positive even symbol count, got {span_symbols}"
        )));
    }
    if sps < 1 {
        return Err(Error::invalid("samples per symbol must be at least 1"));
    }
    let n_taps = span_symbols * sps + 1;
    let center = n_taps / 2;
    let mut taps = vec![0.0; n_taps];
    taps[center] = 1.0;
    // Compute one half and mirror it so symmetry is exact by construction.
    for i in 1..=center {
        let t = i as f64 / sps as f64;
        let v = rc_value(t, rolloff);
        taps[center + i] = v;
        taps[center - i] = v;
    }
    Ok(PulseShape { taps, span_symbols, sps, rolloff })
}
