//! Receiver-side processing: alignment, downsampling, adaptive equalization,
//! slicing, and BER bookkeeping.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::precomp::FirFilter;
use crate::signal::{convolve_same, BitSequence, Waveform};

/// Transmitter pre-compensation scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Plain shaped OOK, no pre-distortion.
    None,
    /// GS pre-distortion against the dispersion response only.
    ModifiedGs,
    /// Joint pre-compensation of bandwidth limitation and dispersion.
    PreBlEdc,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::None, Scheme::ModifiedGs, Scheme::PreBlEdc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::ModifiedGs => "modified-gs",
            Scheme::PreBlEdc => "pre-bl-edc",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scheme::None),
            "modified-gs" => Ok(Scheme::ModifiedGs),
            "pre-bl-edc" => Ok(Scheme::PreBlEdc),
            other => Err(Error::invalid(format!(
                "unknown scheme '{other}' (expected none, modified-gs, or pre-bl-edc)"
            ))),
        }
    }
}

/// Outcome of one measurement point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    SyncFailed,
    TrainingFailed,
    DecisionFailed,
    NotReached,
    Failed(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }

    pub fn from_error(err: &Error) -> Self {
        match err {
            Error::SyncFailure { .. } => RunStatus::SyncFailed,
            Error::TrainingFailure(_) => RunStatus::TrainingFailed,
            Error::DecisionFailure(_) => RunStatus::DecisionFailed,
            Error::NotReached { .. } => RunStatus::NotReached,
            other => RunStatus::Failed(other.to_string()),
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Ok => f.write_str("ok"),
            RunStatus::SyncFailed => f.write_str("sync-failed"),
            RunStatus::TrainingFailed => f.write_str("training-failed"),
            RunStatus::DecisionFailed => f.write_str("decision-failed"),
            RunStatus::NotReached => f.write_str("not-reached"),
            RunStatus::Failed(_) => f.write_str("failed"),
        }
    }
}

/// One BER measurement: received optical power, scheme, equalizer usage,
/// error counts, and the run status. Failed points keep their identifying
/// fields and zero counts.
#[derive(Debug, Clone)]
pub struct BerRecord {
    pub rop_dbm: f64,
    pub baud: f64,
    pub scheme: Scheme,
    pub ffe_used: bool,
    pub ffe_taps: usize,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    pub status: RunStatus,
}

impl BerRecord {
    /// A bare successful measurement, for curve post-processing and tests.
    pub fn measurement(rop_dbm: f64, ber: f64, bits_total: u64) -> Self {
        BerRecord {
            rop_dbm,
            baud: 0.0,
            scheme: Scheme::None,
            ffe_used: false,
            ffe_taps: 0,
            bit_errors: (ber * bits_total as f64).round() as u64,
            bits_total,
            ber,
            status: RunStatus::Ok,
        }
    }
}

/// Converged FFE state.
#[derive(Debug, Clone)]
pub struct EqualizerState {
    pub taps: FirFilter,
    pub mu: f64,
    /// Number of LMS updates performed (all epochs).
    pub trained_symbols: usize,
    /// Mean squared error over the final stretch of training.
    pub final_mse: f64,
    /// Block-averaged squared error across training, in time order; the
    /// convergence witness.
    pub mse_trace: Vec<f64>,
}

/// Finds the circular lag that aligns `x` to `reference`, i.e. the lag
/// maximizing the normalized circular cross-correlation magnitude, so that
/// `x.rotate(lag)` matches `reference`. Lags are searched outward from zero
/// (0, 1, -1, 2, -2, ...), so ties resolve to the smallest magnitude.
/// Fails when the correlation peak stays below 0.2.
pub fn synchronize(x: &Waveform, reference: &Waveform, max_lag: usize) -> Result<i64> {
    let a = x.to_real()?;
    let b = reference.to_real()?;
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "cannot correlate waveforms of different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if 2 * max_lag >= n {
        return Err(Error::invalid(format!(
            "maximum lag {max_lag} too large for {n} samples"
        )));
    }
    let center = |v: Vec<f64>| -> Vec<f64> {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.into_iter().map(|x| x - m).collect()
    };
    let a = center(a);
    let b = center(b);
    let norm = {
        let ea: f64 = a.iter().map(|v| v * v).sum();
        let eb: f64 = b.iter().map(|v| v * v).sum();
        (ea * eb).sqrt()
    };
    if norm == 0.0 {
        return Err(Error::SyncFailure { peak: 0.0 });
    }

    let corr_at = |lag: i64| -> f64 {
        let shift = ((lag % n as i64) + n as i64) % n as i64;
        let mut acc = 0.0;
        for (i, bv) in b.iter().enumerate() {
            acc += a[(i + shift as usize) % n] * bv;
        }
        (acc / norm).abs()
    };

    let mut best_lag = 0i64;
    let mut best = corr_at(0);
    for l in 1..=max_lag as i64 {
        for lag in [l, -l] {
            let c = corr_at(lag);
            if c > best {
                best = c;
                best_lag = lag;
            }
        }
    }
    if best < 0.2 {
        return Err(Error::SyncFailure { peak: best });
    }
    Ok(best_lag)
}

/// 1-D two-means clustering (Lloyd iterations from a midpoint split).
/// Returns (lower mean, upper mean, threshold); `None` when all values are
/// identical.
pub(crate) fn two_means(values: &[f64]) -> Option<(f64, f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return None;
    }
    let mut th = 0.5 * (lo + hi);
    let mut means = (lo, hi);
    for _ in 0..100 {
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0u64, 0.0, 0u64);
        for &v in values {
            if v > th {
                s1 += v;
                n1 += 1;
            } else {
                s0 += v;
                n0 += 1;
            }
        }
        if n0 == 0 || n1 == 0 {
            // Midpoint splits always leave both sides populated on the
            // first pass; a later collapse means the clusters merged.
            return None;
        }
        means = (s0 / n0 as f64, s1 / n1 as f64);
        let next = 0.5 * (means.0 + means.1);
        if (next - th).abs() <= 1e-12 * (hi - lo) {
            th = next;
            break;
        }
        th = next;
    }
    Some((means.0, means.1, th))
}

/// Sampling phase (0..sps) whose symbol stream has the widest eye, measured
/// as the separation of the two amplitude clusters. Ties take the smallest
/// phase.
pub fn best_eye_phase(x: &Waveform, sps: usize) -> Result<usize> {
    if sps < 2 {
        return Ok(0);
    }
    if x.len() < 2 * sps {
        return Err(Error::invalid(format!(
            "waveform too short ({} samples) to pick a phase at {sps} samples per symbol",
            x.len()
        )));
    }
    let v = x.to_real()?;
    let mut best_phase = 0usize;
    let mut best_sep = f64::NEG_INFINITY;
    for phase in 0..sps {
        let stream: Vec<f64> = v.iter().skip(phase).step_by(sps).copied().collect();
        let sep = match two_means(&stream) {
            Some((m0, m1, _)) => m1 - m0,
            None => 0.0,
        };
        if sep > best_sep {
            best_sep = sep;
            best_phase = phase;
        }
    }
    if best_sep <= 0.0 {
        return Err(Error::decision("eye closed at every sampling phase"));
    }
    Ok(best_phase)
}

/// Keeps every `sps`-th sample starting at `phase`; `None` picks the phase
/// with the widest eye via [`best_eye_phase`]. The sample rate drops by
/// `sps`.
pub fn downsample(x: &Waveform, sps: usize, phase: Option<usize>) -> Result<Waveform> {
    if sps < 1 {
        return Err(Error::invalid("samples per symbol must be at least 1"));
    }
    if x.len() < sps {
        return Err(Error::invalid(format!(
            "waveform of {} samples has no full symbol at {sps} samples per symbol",
            x.len()
        )));
    }
    let phase = match phase {
        Some(p) => {
            if p >= sps {
                return Err(Error::invalid(format!(
                    "sampling phase {p} outside 0..{sps}"
                )));
            }
            p
        }
        None => best_eye_phase(x, sps)?,
    };
    let samples: Vec<_> = x.samples().iter().skip(phase).step_by(sps).copied().collect();
    Waveform::new(samples, x.sample_rate() / sps as f64)
}

/// Trains a symbol-spaced feed-forward equalizer with sample-by-sample LMS.
///
/// The filter has an odd tap count with the reference at the center,
/// initialized to a unit impulse. Each update at symbol n computes
/// y[n] = sum_k w[k] input[n + center - k] and nudges the taps along the
/// error gradient. Runs `epochs` sequential passes over the data.
pub fn ffe_train(
    input: &Waveform,
    desired: &Waveform,
    n_taps: usize,
    mu: f64,
    epochs: usize,
) -> Result<EqualizerState> {
    if n_taps == 0 || n_taps.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "FFE tap count must be odd, got {n_taps}"
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("LMS step size must be positive, got {mu}")));
    }
    if epochs < 1 {
        return Err(Error::invalid("training needs at least one epoch"));
    }
    let x = input.to_real()?;
    let d = desired.to_real()?;
    if x.len() != d.len() {
        return Err(Error::invalid(format!(
            "input and desired lengths differ ({} vs {})",
            x.len(),
            d.len()
        )));
    }
    if x.len() < n_taps {
        return Err(Error::invalid(format!(
            "{} samples cannot carry a {n_taps}-tap filter",
            x.len()
        )));
    }

    let c = n_taps / 2;
    let mut w = vec![0.0f64; n_taps];
    w[c] = 1.0;

    let span = x.len() - 2 * c;
    let total_updates = span * epochs;
    let tail_len = (total_updates / 10).clamp(1, 1000);
    let mut tail = vec![0.0f64; tail_len];
    let mut update_idx = 0usize;

    const BLOCK: usize = 256;
    let mut trace = Vec::with_capacity(total_updates / BLOCK + 1);
    let mut block_acc = 0.0;
    let mut block_n = 0usize;

    for _ in 0..epochs {
        for n in c..x.len() - c {
            let mut y = 0.0;
            for (k, &wk) in w.iter().enumerate() {
                y += wk * x[n + c - k];
            }
            let e = d[n] - y;
            if !e.is_finite() {
                return Err(Error::training(format!(
                    "error diverged at update {update_idx}; step size {mu} too large"
                )));
            }
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += mu * e * x[n + c - k];
            }
            let e2 = e * e;
            tail[update_idx % tail_len] = e2;
            update_idx += 1;
            block_acc += e2;
            block_n += 1;
            if block_n == BLOCK {
                trace.push(block_acc / BLOCK as f64);
                block_acc = 0.0;
                block_n = 0;
            }
        }
    }
    if block_n > 0 {
        trace.push(block_acc / block_n as f64);
    }
    let measured = tail_len.min(update_idx);
    let final_mse = tail[..measured].iter().sum::<f64>() / measured as f64;

    Ok(EqualizerState {
        taps: FirFilter::new(w, c)?,
        mu,
        trained_symbols: update_idx,
        final_mse,
        mse_trace: trace,
    })
}

/// Runs a trained equalizer over a symbol stream (zero-padded boundaries,
/// reference delay removed).
pub fn ffe_apply(x: &Waveform, taps: &FirFilter) -> Result<Waveform> {
    convolve_same(x, taps.taps(), taps.delay())
}

/// OOK slicer: clusters the amplitudes with two means and thresholds at the
/// midpoint. Returns the bits and the threshold used. Fails when the two
/// levels cannot be separated.
pub fn decide_ook(symbols: &Waveform) -> Result<(BitSequence, f64)> {
    let v = symbols.to_real()?;
    let (_, _, th) = two_means(&v)
        .ok_or_else(|| Error::decision("all symbol amplitudes are identical"))?;
    let bits: Vec<u8> = v.iter().map(|&s| u8::from(s > th)).collect();
    Ok((BitSequence::new(bits)?, th))
}

/// Compares two equal-length bit sequences: (errors, total).
pub fn count_ber(tx: &BitSequence, rx: &BitSequence) -> Result<(u64, u64)> {
    if tx.len() != rx.len() {
        return Err(Error::invalid(format!(
            "bit sequences differ in length ({} vs {})",
            tx.len(),
            rx.len()
        )));
    }
    let errors = tx
        .bits()
        .iter()
        .zip(rx.bits())
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok((errors, tx.len() as u64))
}

/// Receiver sensitivity: the optical power where the BER curve crosses
/// `threshold_ber`, interpolated linearly in (power, log10 BER) between the
/// first bracketing pair of measurements (scanning by ascending power).
/// Zero-BER points are floored to 0.5 / bits_total before interpolation.
/// Failed records are ignored.
pub fn sensitivity_at(records: &[BerRecord], threshold_ber: f64) -> Result<f64> {
    if !(threshold_ber > 0.0 && threshold_ber < 1.0) {
        return Err(Error::invalid(format!(
            "threshold BER must be in (0, 1), got {threshold_ber}"
        )));
    }
    let mut points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.status.is_ok() && r.bits_total > 0)
        .map(|r| {
            let ber = if r.ber > 0.0 { r.ber } else { 0.5 / r.bits_total as f64 };
            (r.rop_dbm, ber)
        })
        .collect();
    if points.is_empty() {
        return Err(Error::invalid("no successful measurements to interpolate"));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    for &(rop, ber) in &points {
        if ber == threshold_ber {
            return Ok(rop);
        }
    }
    for pair in points.windows(2) {
        let (r1, b1) = pair[0];
        let (r2, b2) = pair[1];
        let straddles = (b1 > threshold_ber && b2 < threshold_ber)
            || (b1 < threshold_ber && b2 > threshold_ber);
        if straddles {
            if r2 == r1 {
                return Ok(r1);
            }
            let t = (threshold_ber.log10() - b1.log10()) / (b2.log10() - b1.log10());
            return Ok(r1 + t * (r2 - r1));
        }
    }
    Err(Error::NotReached { threshold_ber })
}
