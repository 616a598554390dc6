//! Experiment execution: prepares the scheme-specific drive once, then
//! measures BER over repeated noise frames, sweeps operating points in
//! parallel, and assembles spectrum reports.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::channel::{cd_response, simulate_link, LinkConfig};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, SweepVariable};
use crate::harness::io;
use crate::precomp::{
    gs_predistort, ook_target, phase1_run, pre_bl_edc_spaced, FirFilter, Phase1Params,
};
use crate::rxdsp::{
    count_ber, decide_ook, downsample, ffe_apply, ffe_train, synchronize, BerRecord,
    RunStatus, Scheme,
};
use crate::signal::{
    band_energy_fraction, fft_grid, generate_prbs, psd_estimate, BitSequence, Waveform,
};

/// Version string embedded in every report.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tap counts tried when `ffe.n_taps = auto`.
const FFE_TAP_GRID: [usize; 5] = [11, 21, 31, 41, 51];

/// Maximum synchronization search range (samples).
const SYNC_MAX_LAG: usize = 64;

/// A full sweep outcome plus the provenance needed to reproduce it.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<BerRecord>,
    pub config_fingerprint: u64,
    pub tool_version: String,
}

/// SplitMix64 step; the seed-derivation primitive for points and frames.
pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn point_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64 + 1))
}

fn frame_noise_seed(point: u64, frame: usize) -> u64 {
    splitmix64(point.wrapping_add(frame as u64 + 1))
}

fn phase1_seed(master: u64) -> u64 {
    splitmix64(master ^ 0x5048_4153_4531) // "PHASE1" tag bits
}

/// Everything that is computed once per (scheme, baud) and reused across
/// noise frames and sweep points: the fixed payload, the shaped target, the
/// pre-distorted drive, and the Phase-I taps when applicable.
#[derive(Debug, Clone)]
pub struct PreparedScheme {
    pub scheme: Scheme,
    pub bits: BitSequence,
    /// Shaped unit-power amplitude target.
    pub target: Waveform,
    /// Transmitter drive (scheme applied), normalized to unit mean power.
    pub drive: Waveform,
    /// AC-coupled target used as the synchronization reference.
    pub reference: Waveform,
    /// Centered desired symbol values for FFE training.
    pub desired: Vec<f64>,
    pub h_bl: Option<FirFilter>,
}

fn with_baud(cfg: &ExperimentConfig, baud: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.baud = baud;
    c
}

/// Builds the transmit side for one scheme at one baud rate. For
/// `pre-bl-edc` this runs Phase I inline (noiselessly, from the master
/// seed) unless a tap file is configured.
pub fn prepare_scheme(cfg: &ExperimentConfig, scheme: Scheme, baud: f64) -> Result<PreparedScheme> {
    let cfg = with_baud(cfg, baud);
    let link = cfg.noiseless_link()?;
    let bits = generate_prbs(15, payload_seed(cfg.seed), cfg.mc.frame_symbols)?;
    let target = ook_target(&bits, baud, cfg.sps, cfg.tx_bias)?;

    let mut h_bl = None;
    let drive = match scheme {
        Scheme::None => target.clone(),
        Scheme::ModifiedGs => {
            let grid = fft_grid(target.len(), link.sample_rate());
            let forward = cd_response(&link.fiber, &grid)?;
            gs_predistort(&target, &forward, &cfg.gs)?
        }
        Scheme::PreBlEdc => {
            let taps = match &cfg.phase1.taps_file {
                Some(path) => io::import_taps(path)?,
                None => {
                    let params = Phase1Params {
                        ffe_taps: cfg.phase1_taps(),
                        train_symbols: cfg.phase1.train_symbols,
                        spacing: cfg.phase1.spacing,
                        target_bias: cfg.tx_bias,
                        ..Phase1Params::default()
                    };
                    phase1_run(&link, &cfg.gs, &params, phase1_seed(cfg.seed))?.h_bl
                }
            };
            let drive = pre_bl_edc_spaced(
                &target,
                &link,
                &cfg.gs,
                &taps,
                cfg.phase1_k(),
                cfg.phase1.eps,
                cfg.phase1.spacing,
            )?;
            h_bl = Some(taps);
            drive
        }
    };
    let drive = drive.normalize_unit_power();
    let reference = target.remove_mean()?;
    let mean = bits.ones() as f64 / bits.len() as f64;
    let desired: Vec<f64> = bits.bits().iter().map(|&b| f64::from(b) - mean).collect();
    Ok(PreparedScheme { scheme, bits, target, drive, reference, desired, h_bl })
}

fn payload_seed(master: u64) -> u32 {
    let folded = splitmix64(master ^ 0x501D) & 0x7fff;
    if folded == 0 { 0x7fff } else { folded as u32 }
}

struct FrameChain {
    lag: i64,
}

/// Receives one frame: simulate, align (with the cached lag after frame
/// zero), and downsample to symbols. The link is zero-phase end to end and
/// the shaper centers symbol k at sample k*sps, so once the correlator has
/// the integer lag the sampling phase is 0 by construction; estimating it
/// from the unequalized eye instead is unreliable for the pre-distorted
/// schemes, whose eye only opens after the FFE.
fn receive_frame(
    prepared: &PreparedScheme,
    link: &LinkConfig,
    chain: &mut Option<FrameChain>,
) -> Result<Waveform> {
    let rx = simulate_link(&prepared.drive, link)?;
    let lag = match chain {
        Some(c) => c.lag,
        None => {
            let lag = synchronize(&rx, &prepared.reference, SYNC_MAX_LAG)?;
            *chain = Some(FrameChain { lag });
            lag
        }
    };
    downsample(&rx.rotate(lag), link.sps, Some(0))
}

/// Scales a symbol stream so its standard deviation matches the desired
/// sequence; keeps LMS inputs near the unit-impulse initialization.
fn match_scale(symbols: &Waveform, desired_std: f64) -> Result<Waveform> {
    let std = symbols.mean_power().sqrt();
    if std == 0.0 {
        return Err(Error::training("received symbol stream has zero power"));
    }
    let g = desired_std / std;
    Waveform::new(symbols.samples().iter().map(|s| s * g).collect(), symbols.sample_rate())
}

fn slice_wave(w: &Waveform, lo: usize, hi: usize) -> Result<Waveform> {
    Waveform::new(w.samples()[lo..hi].to_vec(), w.sample_rate())
}

fn slice_bits(bits: &BitSequence, lo: usize, hi: usize) -> Result<BitSequence> {
    BitSequence::new(bits.bits()[lo..hi].to_vec())
}

/// Counts frame errors over the guarded interior region.
fn frame_errors(
    symbols: &Waveform,
    bits: &BitSequence,
    guard: usize,
) -> Result<(u64, u64)> {
    let n = symbols.len();
    if n != bits.len() {
        return Err(Error::invalid(format!(
            "symbol stream covers {n} symbols for {} payload bits",
            bits.len()
        )));
    }
    if 2 * guard >= n {
        return Err(Error::invalid("guard interval swallows the whole frame"));
    }
    let (decided, _) = decide_ook(&slice_wave(symbols, guard, n - guard)?)?;
    count_ber(&slice_bits(bits, guard, n - guard)?, &decided)
}

struct TrainedFfe {
    taps: FirFilter,
}

/// Trains the receiver FFE on frame-zero symbols; when the tap count is
/// `auto`, each candidate is trained on the leading symbols and judged on
/// the rest of the frame (ties go to the shorter filter).
fn train_ffe(
    cfg: &ExperimentConfig,
    prepared: &PreparedScheme,
    frame0: &Waveform,
) -> Result<TrainedFfe> {
    let desired = Waveform::from_real(prepared.desired.clone(), frame0.sample_rate())?;
    let desired_std = desired.mean_power().sqrt();
    let x = match_scale(frame0, desired_std)?;
    let span = cfg.ffe.train_symbols.min(x.len());
    let x_train = slice_wave(&x, 0, span)?;
    let d_train = slice_wave(&desired, 0, span)?;

    let train_one = |n_taps: usize| -> Result<FirFilter> {
        Ok(ffe_train(&x_train, &d_train, n_taps, cfg.ffe.mu, cfg.ffe.epochs)?.taps)
    };

    if let Some(n_taps) = cfg.ffe.n_taps {
        return Ok(TrainedFfe { taps: train_one(n_taps)? });
    }

    // Validation region: the untouched remainder of frame zero.
    let mut best: Option<(u64, usize, FirFilter)> = None;
    for &n_taps in &FFE_TAP_GRID {
        let taps = train_one(n_taps)?;
        let eq = ffe_apply(&x, &taps)?;
        let lo = span.max(n_taps).min(x.len().saturating_sub(2 * n_taps + 2));
        let hi = x.len() - n_taps;
        let (decided, _) = decide_ook(&slice_wave(&eq, lo, hi)?)?;
        let (errors, _) = count_ber(&slice_bits(&prepared.bits, lo, hi)?, &decided)?;
        let better = match &best {
            None => true,
            Some((e, t, _)) => errors < *e || (errors == *e && n_taps < *t),
        };
        if better {
            best = Some((errors, n_taps, taps));
        }
    }
    let (_, _, taps) = best.expect("tap grid is non-empty");
    Ok(TrainedFfe { taps })
}

/// Measures one operating point: repeated noise frames through the link
/// until the error target or the bit budget is hit. Never fails: pipeline
/// errors come back as a record with the matching status and zero counts.
pub fn run_point(
    cfg: &ExperimentConfig,
    prepared: &PreparedScheme,
    rop_dbm: f64,
    baud: f64,
    seed: u64,
) -> BerRecord {
    let ffe_used = cfg.ffe_enabled(prepared.scheme);
    let mut record = BerRecord {
        rop_dbm,
        baud,
        scheme: prepared.scheme,
        ffe_used,
        ffe_taps: 0,
        bit_errors: 0,
        bits_total: 0,
        ber: 0.0,
        status: RunStatus::Ok,
    };
    match measure_point(cfg, prepared, rop_dbm, baud, seed, ffe_used) {
        Ok((errors, total, taps)) => {
            record.bit_errors = errors;
            record.bits_total = total;
            record.ber = if total > 0 { errors as f64 / total as f64 } else { 0.0 };
            record.ffe_taps = taps;
        }
        Err(err) => {
            record.status = RunStatus::from_error(&err);
        }
    }
    record
}

fn measure_point(
    cfg: &ExperimentConfig,
    prepared: &PreparedScheme,
    rop_dbm: f64,
    baud: f64,
    seed: u64,
    ffe_used: bool,
) -> Result<(u64, u64, usize)> {
    let cfg = with_baud(cfg, baud);
    let desired_std = {
        let n = prepared.desired.len() as f64;
        (prepared.desired.iter().map(|v| v * v).sum::<f64>() / n).sqrt()
    };

    let mut chain: Option<FrameChain> = None;
    let mut ffe: Option<TrainedFfe> = None;
    let mut errors = 0u64;
    let mut total = 0u64;
    let max_frames = (cfg.mc.max_bits as usize).div_ceil(cfg.mc.frame_symbols) + 1;

    for frame in 0..max_frames {
        let link = cfg.link_config(rop_dbm, frame_noise_seed(seed, frame))?;
        let symbols = receive_frame(prepared, &link, &mut chain)?;

        if ffe_used && frame == 0 {
            ffe = Some(train_ffe(&cfg, prepared, &symbols)?);
            // Frame zero trained the equalizer; its bits are not counted.
            continue;
        }

        let (stream, guard) = match &ffe {
            Some(t) => {
                let scaled = match_scale(&symbols, desired_std)?;
                (ffe_apply(&scaled, &t.taps)?, t.taps.len())
            }
            None => (symbols, 0),
        };
        let (e, n) = frame_errors(&stream, &prepared.bits, guard)?;
        errors += e;
        total += n;
        if errors >= cfg.mc.target_errors || total >= cfg.mc.max_bits {
            break;
        }
    }
    let taps = ffe.as_ref().map_or(0, |t| t.taps.len());
    Ok((errors, total, taps))
}

/// Single-point measurement at the configured operating point.
pub fn run_single(cfg: &ExperimentConfig) -> Result<BerRecord> {
    cfg.validate()?;
    let prepared = prepare_scheme(cfg, cfg.scheme, cfg.baud)?;
    Ok(run_point(cfg, &prepared, cfg.rop_dbm, cfg.baud, point_seed(cfg.seed, 0)))
}

/// Sweeps the configured variable, one parallel task per point with a
/// derived seed, and writes `sweep.csv` into the output directory. Partial
/// failures (including a diverging Phase I) stay in the record list with
/// their status; only config validation and the final write abort.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;

    // Baud changes re-shape the frame, so prepare per distinct baud value.
    // A failed preparation poisons only the points at that baud.
    let bauds: Vec<f64> = match cfg.sweep.variable {
        SweepVariable::RopDbm => vec![cfg.baud],
        SweepVariable::Baud => cfg.sweep.values.clone(),
    };
    let mut prepared_by_baud: HashMap<u64, Result<PreparedScheme>> = HashMap::new();
    for &baud in &bauds {
        prepared_by_baud
            .entry(baud.to_bits())
            .or_insert_with(|| prepare_scheme(cfg, cfg.scheme, baud));
    }

    let records: Vec<BerRecord> = cfg
        .sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(idx, &value)| {
            let (rop, baud) = match cfg.sweep.variable {
                SweepVariable::RopDbm => (value, cfg.baud),
                SweepVariable::Baud => (cfg.rop_dbm, value),
            };
            match &prepared_by_baud[&baud.to_bits()] {
                Ok(prepared) => run_point(cfg, prepared, rop, baud, point_seed(cfg.seed, idx)),
                Err(err) => BerRecord {
                    rop_dbm: rop,
                    baud,
                    scheme: cfg.scheme,
                    ffe_used: cfg.ffe_enabled(cfg.scheme),
                    ffe_taps: 0,
                    bit_errors: 0,
                    bits_total: 0,
                    ber: 0.0,
                    status: RunStatus::from_error(err),
                },
            }
        })
        .collect();

    let result = SweepResult {
        records,
        config_fingerprint: cfg.fingerprint(),
        tool_version: TOOL_VERSION.to_string(),
    };
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    io::write_ber_csv(
        &result.records,
        result.config_fingerprint,
        &result.tool_version,
        &cfg.out_dir.join("sweep.csv"),
    )?;
    Ok(result)
}

/// Spectral comparison of the two pre-compensation schemes on the current
/// config: PSDs of the pre-distorted drives and of the noiseless received
/// signals, plus the summary scalars the schemes are judged on.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// One-sided PSD frequency grid (shared by all columns).
    pub freq: Vec<f64>,
    /// Drive PSDs: [modified-gs, pre-bl-edc].
    pub tx_psd: [Vec<f64>; 2],
    /// Noiseless received-signal PSDs: [modified-gs, pre-bl-edc].
    pub rx_psd: [Vec<f64>; 2],
    /// Drive energy fraction in [baud/4, Nyquist]: [modified-gs, pre-bl-edc].
    pub high_band_fraction: [f64; 2],
    /// Variance of the received dB PSD over [0, 0.8 * baud/2].
    pub rx_flatness_db_var: [f64; 2],
}

/// Runs both schemes, estimates spectra, and writes `spectrum_tx.csv` /
/// `spectrum_rx.csv` with band-fraction and flatness summary rows.
pub fn run_spectrum_report(cfg: &ExperimentConfig) -> Result<SpectrumReport> {
    cfg.validate()?;
    if cfg.scheme == Scheme::None {
        return Err(Error::invalid(
            "spectrum report compares pre-distortion schemes; scheme must not be 'none'",
        ));
    }
    let schemes = [Scheme::ModifiedGs, Scheme::PreBlEdc];
    let mut tx_psd: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut rx_psd: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut high_band = [0.0f64; 2];
    let mut flatness = [0.0f64; 2];
    let mut freq: Vec<f64> = Vec::new();

    for (i, &scheme) in schemes.iter().enumerate() {
        let prepared = prepare_scheme(cfg, scheme, cfg.baud)?;
        // Received side: noiseless at reference power (unity gain).
        let mut link = cfg.noiseless_link()?;
        link.noise.rop_dbm = link.noise.rop_ref_dbm;
        let rx = simulate_link(&prepared.drive, &link)?;

        let segment = prepared.drive.len().min(1024);
        let (f, tx) = psd_estimate(&prepared.drive, segment, 0.5)?;
        let (_, rxp) = psd_estimate(&rx, segment, 0.5)?;
        if i == 0 {
            freq = f;
        }
        let fs = link.sample_rate();
        high_band[i] = band_energy_fraction(&prepared.drive, cfg.baud / 4.0, fs / 2.0)?;
        flatness[i] = db_psd_variance(&freq, &rxp, 0.8 * cfg.baud / 2.0);
        tx_psd[i] = tx;
        rx_psd[i] = rxp;
    }

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let fp = cfg.fingerprint();
    let labels = ["psd_modified_gs".to_string(), "psd_pre_bl_edc".to_string()];
    io::write_spectrum_csv(
        &cfg.out_dir.join("spectrum_tx.csv"),
        &freq,
        &[
            (labels[0].clone(), tx_psd[0].clone()),
            (labels[1].clone(), tx_psd[1].clone()),
        ],
        &[("high_band_fraction".to_string(), high_band.to_vec())],
        fp,
        TOOL_VERSION,
    )?;
    io::write_spectrum_csv(
        &cfg.out_dir.join("spectrum_rx.csv"),
        &freq,
        &[
            (labels[0].clone(), rx_psd[0].clone()),
            (labels[1].clone(), rx_psd[1].clone()),
        ],
        &[("db_psd_variance".to_string(), flatness.to_vec())],
        fp,
        TOOL_VERSION,
    )?;

    Ok(SpectrumReport {
        freq,
        tx_psd,
        rx_psd,
        high_band_fraction: high_band,
        rx_flatness_db_var: flatness,
    })
}

/// Variance of 10*log10(psd) over bins with f <= f_max (zero-power bins
/// skipped).
fn db_psd_variance(freq: &[f64], psd: &[f64], f_max: f64) -> f64 {
    let db: Vec<f64> = freq
        .iter()
        .zip(psd)
        .filter(|(f, p)| **f <= f_max && **p > 0.0)
        .map(|(_, p)| 10.0 * p.log10())
        .collect();
    if db.len() < 2 {
        return 0.0;
    }
    let mean = db.iter().sum::<f64>() / db.len() as f64;
    db.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / db.len() as f64
}

/// Phase-I training on the configured link (noiseless), from the master
/// seed. The CLI wraps this to produce tap files.
pub fn run_phase1(cfg: &ExperimentConfig) -> Result<FirFilter> {
    cfg.validate()?;
    let link = cfg.noiseless_link()?;
    let params = Phase1Params {
        ffe_taps: cfg.phase1_taps(),
        train_symbols: cfg.phase1.train_symbols,
        spacing: cfg.phase1.spacing,
        target_bias: cfg.tx_bias,
        ..Phase1Params::default()
    };
    Ok(phase1_run(&link, &cfg.gs, &params, phase1_seed(cfg.seed))?.h_bl)
}
