//! Experiment configuration: flat dotted-key text files, overrides, and the
//! resolved-config fingerprint embedded in every output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{
    BlFilterSpec, BlModel, BlPlacement, FiberParams, LinkConfig, NoiseSpec,
};
use crate::error::{Error, Result};
use crate::precomp::{GsConfig, TapSpacing};
use crate::rxdsp::Scheme;

/// Tri-state switch: resolved from the scheme when `Auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Toggle {
    Auto,
    On,
    Off,
}

impl Toggle {
    fn parse(value: &str) -> Option<Self> {
        match value {
            "auto" => Some(Toggle::Auto),
            "true" => Some(Toggle::On),
            "false" => Some(Toggle::Off),
            _ => None,
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Toggle::Auto => "auto",
            Toggle::On => "true",
            Toggle::Off => "false",
        }
    }
}

/// Receiver FFE settings. `n_taps = None` requests the built-in tap-count
/// search on the first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FfeConfig {
    pub enabled: Toggle,
    pub n_taps: Option<usize>,
    pub mu: f64,
    pub epochs: usize,
    pub train_symbols: usize,
}

/// Phase-I training settings; `taps_file` substitutes a stored tap file for
/// inline training.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Config {
    pub n_taps: Option<usize>,
    pub train_symbols: usize,
    /// Inverse length; `None` matches the Phase-I tap count.
    pub k: Option<usize>,
    /// Relative regularization for the tap inversion.
    pub eps: f64,
    pub spacing: TapSpacing,
    pub taps_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    RopDbm,
    Baud,
}

impl SweepVariable {
    fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::RopDbm => "rop_dbm",
            SweepVariable::Baud => "baud",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// Monte-Carlo depth: frames of `frame_symbols` bits repeat until
/// `target_errors` errors are seen or `max_bits` bits are counted.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub frame_symbols: usize,
    pub target_errors: u64,
    pub max_bits: u64,
}

/// Fully resolved experiment description. Everything an experiment does is
/// a deterministic function of this struct; [`ExperimentConfig::fingerprint`]
/// hashes its canonical text form.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub baud: f64,
    pub sps: usize,
    pub fiber: FiberParams,
    pub bl_bypass: bool,
    pub bl_f3db_hz: f64,
    pub bl_f10db_hz: f64,
    pub bl_placement: BlPlacement,
    pub sigma_ref: f64,
    pub rop_dbm: f64,
    pub rop_ref_dbm: f64,
    /// Carrier bias of the transmit target (see [`crate::precomp::ook_target`]).
    pub tx_bias: f64,
    pub gs: GsConfig,
    pub scheme: Scheme,
    pub ffe: FfeConfig,
    pub phase1: Phase1Config,
    pub sweep: SweepConfig,
    pub mc: McConfig,
    pub fec_threshold_ber: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            baud: 32e9,
            sps: 2,
            fiber: FiberParams {
                length_km: 50.0,
                dispersion_ps_nm_km: 17.0,
                wavelength_nm: 1550.0,
            },
            bl_bypass: false,
            bl_f3db_hz: 9e9,
            bl_f10db_hz: 16e9,
            bl_placement: BlPlacement::TxElectrical,
            sigma_ref: 0.01,
            rop_dbm: -6.0,
            rop_ref_dbm: 0.0,
            tx_bias: crate::precomp::DEFAULT_TARGET_BIAS,
            gs: GsConfig::default(),
            scheme: Scheme::ModifiedGs,
            ffe: FfeConfig {
                enabled: Toggle::Auto,
                n_taps: None,
                mu: 5e-4,
                epochs: 3,
                train_symbols: 10_000,
            },
            phase1: Phase1Config {
                n_taps: None,
                train_symbols: 10_000,
                k: None,
                eps: 1e-4,
                spacing: TapSpacing::Symbol,
                taps_file: None,
            },
            sweep: SweepConfig {
                variable: SweepVariable::RopDbm,
                values: (-14..=-2).map(f64::from).collect(),
            },
            mc: McConfig { frame_symbols: 32_768, target_errors: 100, max_bits: 10_000_000 },
            fec_threshold_ber: 3.8e-3,
            seed: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: Option<usize>) -> Result<T> {
    value.parse::<T>().map_err(|_| {
        config_err(line, format!("key '{key}': cannot parse value '{value}'"))
    })
}

fn config_err(line: Option<usize>, msg: String) -> Error {
    match line {
        Some(l) => Error::config_at(l, msg),
        None => Error::config(msg),
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    /// Parses a config file body: one `key = value` per line, `#` comments,
    /// unknown keys are hard errors carrying the line number. Later lines
    /// override earlier ones.
    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config_at(
                    line_no,
                    format!("expected 'key = value', got '{line}'"),
                ));
            };
            cfg.set_key(key.trim(), value.trim(), Some(line_no))?;
        }
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    /// Applies a `key=value` command-line override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let Some((key, value)) = kv.split_once('=') else {
            return Err(Error::config(format!(
                "override '{kv}' is not of the form key=value"
            )));
        };
        self.set_key(key.trim(), value.trim(), None)
    }

    fn set_key(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<()> {
        match key {
            "link.baud" => self.baud = parse_num(key, value, line)?,
            "link.sps" => self.sps = parse_num(key, value, line)?,
            "link.fiber.length_km" => self.fiber.length_km = parse_num(key, value, line)?,
            "link.fiber.dispersion_ps_nm_km" => {
                self.fiber.dispersion_ps_nm_km = parse_num(key, value, line)?
            }
            "link.fiber.wavelength_nm" => {
                self.fiber.wavelength_nm = parse_num(key, value, line)?
            }
            "link.bl.bypass" => self.bl_bypass = parse_num(key, value, line)?,
            "link.bl.f_3db_hz" => self.bl_f3db_hz = parse_num(key, value, line)?,
            "link.bl.f_10db_hz" => self.bl_f10db_hz = parse_num(key, value, line)?,
            "link.bl.placement" => {
                self.bl_placement = match value {
                    "tx-electrical" => BlPlacement::TxElectrical,
                    "rx-electrical" => BlPlacement::RxElectrical,
                    "split" => BlPlacement::Split,
                    other => {
                        return Err(config_err(
                            line,
                            format!(
                                "key '{key}': unknown placement '{other}' \
                                 (expected tx-electrical, rx-electrical, or split)"
                            ),
                        ))
                    }
                }
            }
            "link.noise.sigma_ref" => self.sigma_ref = parse_num(key, value, line)?,
            "link.noise.rop_dbm" => self.rop_dbm = parse_num(key, value, line)?,
            "link.noise.rop_ref_dbm" => self.rop_ref_dbm = parse_num(key, value, line)?,
            "tx.bias" => self.tx_bias = parse_num(key, value, line)?,
            "gs.n_iter" => self.gs.n_iter = parse_num(key, value, line)?,
            "gs.alpha_amp" => self.gs.alpha_amp = parse_num(key, value, line)?,
            "gs.alpha_phase" => self.gs.alpha_phase = parse_num(key, value, line)?,
            "gs.backward_eps" => self.gs.backward_eps = parse_num(key, value, line)?,
            "gs.normalize_output" => self.gs.normalize_output = parse_num(key, value, line)?,
            "scheme" => {
                self.scheme = value
                    .parse::<Scheme>()
                    .map_err(|e| config_err(line, e.to_string()))?
            }
            "ffe.enabled" => {
                self.ffe.enabled = Toggle::parse(value).ok_or_else(|| {
                    config_err(
                        line,
                        format!("key '{key}': expected auto, true, or false, got '{value}'"),
                    )
                })?
            }
            "ffe.n_taps" => self.ffe.n_taps = parse_auto_usize(key, value, line)?,
            "ffe.mu" => self.ffe.mu = parse_num(key, value, line)?,
            "ffe.epochs" => self.ffe.epochs = parse_num(key, value, line)?,
            "ffe.train_symbols" => self.ffe.train_symbols = parse_num(key, value, line)?,
            "phase1.n_taps" => self.phase1.n_taps = parse_auto_usize(key, value, line)?,
            "phase1.train_symbols" => {
                self.phase1.train_symbols = parse_num(key, value, line)?
            }
            "phase1.k" => self.phase1.k = parse_auto_usize(key, value, line)?,
            "phase1.eps" => self.phase1.eps = parse_num(key, value, line)?,
            "phase1.spacing" => {
                self.phase1.spacing = match value {
                    "symbol" => TapSpacing::Symbol,
                    "fractional" => TapSpacing::Fractional,
                    other => {
                        return Err(config_err(
                            line,
                            format!(
                                "key '{key}': unknown spacing '{other}' \
                                 (expected symbol or fractional)"
                            ),
                        ))
                    }
                }
            }
            "phase1.taps_file" => {
                self.phase1.taps_file =
                    if value == "none" { None } else { Some(PathBuf::from(value)) }
            }
            "sweep.variable" => {
                self.sweep.variable = match value {
                    "rop_dbm" => SweepVariable::RopDbm,
                    "baud" => SweepVariable::Baud,
                    other => {
                        return Err(config_err(
                            line,
                            format!(
                                "key '{key}': unknown sweep variable '{other}' \
                                 (expected rop_dbm or baud)"
                            ),
                        ))
                    }
                }
            }
            "sweep.values" => {
                let mut values = Vec::new();
                for part in value.split(',') {
                    values.push(parse_num::<f64>(key, part.trim(), line)?);
                }
                self.sweep.values = values;
            }
            "mc.frame_symbols" => self.mc.frame_symbols = parse_num(key, value, line)?,
            "mc.target_errors" => self.mc.target_errors = parse_num(key, value, line)?,
            "mc.max_bits" => self.mc.max_bits = parse_num(key, value, line)?,
            "fec.threshold_ber" => self.fec_threshold_ber = parse_num(key, value, line)?,
            "seed" => self.seed = parse_num(key, value, line)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => {
                return Err(config_err(line, format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.link_config(self.rop_dbm, 0)?.validate()?;
        self.gs.validate()?;
        if !(self.tx_bias >= 0.0 && self.tx_bias.is_finite()) {
            return Err(Error::config(format!(
                "tx.bias must be finite and >= 0, got {}",
                self.tx_bias
            )));
        }
        if let Some(n) = self.ffe.n_taps {
            if n == 0 || n % 2 == 0 {
                return Err(Error::config(format!(
                    "ffe.n_taps must be odd, got {n}"
                )));
            }
        }
        if let Some(n) = self.phase1.n_taps {
            if n == 0 || n % 2 == 0 {
                return Err(Error::config(format!(
                    "phase1.n_taps must be odd, got {n}"
                )));
            }
        }
        if !(self.ffe.mu > 0.0) || self.ffe.epochs == 0 {
            return Err(Error::config("ffe.mu must be positive and ffe.epochs nonzero"));
        }
        if !(self.phase1.eps >= 0.0) {
            return Err(Error::config(format!(
                "phase1.eps must be >= 0, got {}",
                self.phase1.eps
            )));
        }
        if self.phase1.k == Some(0) {
            return Err(Error::config("phase1.k must be at least 1"));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::config("sweep.values must not be empty"));
        }
        if self.sweep.values.len() > 1 {
            let increasing = self.sweep.values.windows(2).all(|w| w[1] > w[0]);
            let decreasing = self.sweep.values.windows(2).all(|w| w[1] < w[0]);
            if !increasing && !decreasing {
                return Err(Error::config("sweep.values must be strictly monotone"));
            }
        }
        if self.mc.frame_symbols < 1024 {
            return Err(Error::config(format!(
                "mc.frame_symbols must be at least 1024, got {}",
                self.mc.frame_symbols
            )));
        }
        if self.mc.target_errors == 0 {
            return Err(Error::config("mc.target_errors must be at least 1"));
        }
        if self.mc.max_bits < self.mc.frame_symbols as u64 {
            return Err(Error::config(
                "mc.max_bits must cover at least one frame",
            ));
        }
        if !(self.fec_threshold_ber > 0.0 && self.fec_threshold_ber < 1.0) {
            return Err(Error::config(format!(
                "fec.threshold_ber must be in (0, 1), got {}",
                self.fec_threshold_ber
            )));
        }
        Ok(())
    }

    /// Assembles the physical-link description at a given received power
    /// and noise seed.
    pub fn link_config(&self, rop_dbm: f64, noise_seed: u64) -> Result<LinkConfig> {
        let bl = if self.bl_bypass {
            BlModel::Bypass
        } else {
            BlModel::SuperGaussian(BlFilterSpec::new(self.bl_f3db_hz, self.bl_f10db_hz)?)
        };
        Ok(LinkConfig {
            baud: self.baud,
            sps: self.sps,
            fiber: self.fiber.clone(),
            bl,
            bl_placement: self.bl_placement,
            noise: NoiseSpec {
                sigma_ref: self.sigma_ref,
                rop_dbm,
                rop_ref_dbm: self.rop_ref_dbm,
                seed: noise_seed,
            },
        })
    }

    /// The same link with noise switched off (training / clean references).
    pub fn noiseless_link(&self) -> Result<LinkConfig> {
        let mut link = self.link_config(self.rop_dbm, 0)?;
        link.noise.sigma_ref = 0.0;
        Ok(link)
    }

    /// Whether the receiver FFE runs for a given scheme, resolving `auto`
    /// (the joint pre-compensation scheme needs no post-equalizer).
    pub fn ffe_enabled(&self, scheme: Scheme) -> bool {
        match self.ffe.enabled {
            Toggle::On => true,
            Toggle::Off => false,
            Toggle::Auto => scheme != Scheme::PreBlEdc,
        }
    }

    /// Phase-I tap count with `auto` resolved.
    pub fn phase1_taps(&self) -> usize {
        self.phase1.n_taps.unwrap_or(31)
    }

    /// Inverse length with `auto` resolved (match the Phase-I tap count).
    pub fn phase1_k(&self) -> usize {
        self.phase1.k.unwrap_or_else(|| self.phase1_taps())
    }

    /// Canonical resolved text form: every key exactly once, fixed order.
    /// This is what the fingerprint hashes and what gets written next to
    /// results.
    pub fn canonical_lines(&self) -> Vec<String> {
        let auto_usize =
            |v: Option<usize>| v.map_or_else(|| "auto".to_string(), |n| n.to_string());
        let placement = match self.bl_placement {
            BlPlacement::TxElectrical => "tx-electrical",
            BlPlacement::RxElectrical => "rx-electrical",
            BlPlacement::Split => "split",
        };
        let spacing = match self.phase1.spacing {
            TapSpacing::Symbol => "symbol",
            TapSpacing::Fractional => "fractional",
        };
        let taps_file = self
            .phase1
            .taps_file
            .as_ref()
            .map_or_else(|| "none".to_string(), |p| p.display().to_string());
        let mut values = String::new();
        for (i, v) in self.sweep.values.iter().enumerate() {
            if i > 0 {
                values.push(',');
            }
            let _ = write!(values, "{v}");
        }
        vec![
            format!("link.baud = {}", self.baud),
            format!("link.sps = {}", self.sps),
            format!("link.fiber.length_km = {}", self.fiber.length_km),
            format!("link.fiber.dispersion_ps_nm_km = {}", self.fiber.dispersion_ps_nm_km),
            format!("link.fiber.wavelength_nm = {}", self.fiber.wavelength_nm),
            format!("link.bl.bypass = {}", self.bl_bypass),
            format!("link.bl.f_3db_hz = {}", self.bl_f3db_hz),
            format!("link.bl.f_10db_hz = {}", self.bl_f10db_hz),
            format!("link.bl.placement = {placement}"),
            format!("link.noise.sigma_ref = {}", self.sigma_ref),
            format!("link.noise.rop_dbm = {}", self.rop_dbm),
            format!("link.noise.rop_ref_dbm = {}", self.rop_ref_dbm),
            format!("tx.bias = {}", self.tx_bias),
            format!("gs.n_iter = {}", self.gs.n_iter),
            format!("gs.alpha_amp = {}", self.gs.alpha_amp),
            format!("gs.alpha_phase = {}", self.gs.alpha_phase),
            format!("gs.backward_eps = {}", self.gs.backward_eps),
            format!("gs.normalize_output = {}", self.gs.normalize_output),
            format!("scheme = {}", self.scheme),
            format!("ffe.enabled = {}", self.ffe.enabled.as_str()),
            format!("ffe.n_taps = {}", auto_usize(self.ffe.n_taps)),
            format!("ffe.mu = {}", self.ffe.mu),
            format!("ffe.epochs = {}", self.ffe.epochs),
            format!("ffe.train_symbols = {}", self.ffe.train_symbols),
            format!("phase1.n_taps = {}", auto_usize(self.phase1.n_taps)),
            format!("phase1.train_symbols = {}", self.phase1.train_symbols),
            format!("phase1.k = {}", auto_usize(self.phase1.k)),
            format!("phase1.eps = {}", self.phase1.eps),
            format!("phase1.spacing = {spacing}"),
            format!("phase1.taps_file = {taps_file}"),
            format!("sweep.variable = {}", self.sweep.variable.as_str()),
            format!("sweep.values = {values}"),
            format!("mc.frame_symbols = {}", self.mc.frame_symbols),
            format!("mc.target_errors = {}", self.mc.target_errors),
            format!("mc.max_bits = {}", self.mc.max_bits),
            format!("fec.threshold_ber = {}", self.fec_threshold_ber),
            format!("seed = {}", self.seed),
            format!("out_dir = {}", self.out_dir.display()),
        ]
    }

    /// FNV-1a (64-bit) hash of the canonical config text.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.canonical_lines().join("\n").as_bytes())
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn parse_auto_usize(key: &str, value: &str, line: Option<usize>) -> Result<Option<usize>> {
    if value == "auto" {
        Ok(None)
    } else {
        Ok(Some(parse_num::<usize>(key, value, line)?))
    }
}
