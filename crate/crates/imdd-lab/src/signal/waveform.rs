//! Core sample containers: [`Waveform`] and [`BitSequence`].

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A uniformly sampled signal with an explicit sample rate.
///
/// Samples are stored as complex numbers; real signals (drive voltages,
/// detected photocurrents) carry an imaginary part that is identically zero,
/// not merely small. Use [`Waveform::is_real`] to check that invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<Complex64>,
    sample_rate: f64,
    label: String,
}

impl Waveform {
    /// Build a waveform from complex samples.
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("waveform must contain at least one sample"));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        Ok(Self { samples, sample_rate, label: String::new() })
    }

    /// Build a real waveform; imaginary parts are exactly zero.
    pub fn from_real(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        Self::new(samples.into_iter().map(|x| Complex64::new(x, 0.0)).collect(), sample_rate)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// True iff every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|s| s.im == 0.0)
    }

    /// Real parts of all samples.
    pub fn real_part(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.re).collect()
    }

    /// Real parts, failing if the waveform is not exactly real.
    pub fn to_real(&self) -> Result<Vec<f64>> {
        if !self.is_real() {
            return Err(Error::invalid(format!(
                "waveform '{}' is not real-valued",
                self.label
            )));
        }
        Ok(self.real_part())
    }

    /// Mean of |x[n]|^2.
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Sum of |x[n]|^2.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>()
    }

    /// Scale so that the mean power becomes 1. A zero signal is left unchanged.
    pub fn normalize_unit_power(&self) -> Waveform {
        let p = self.mean_power();
        if p == 0.0 {
            return self.clone();
        }
        let g = 1.0 / p.sqrt();
        let samples = self.samples.iter().map(|s| s * g).collect();
        Waveform { samples, sample_rate: self.sample_rate, label: self.label.clone() }
    }

    /// Subtract the mean of the real part (AC coupling). Input must be real.
    pub fn remove_mean(&self) -> Result<Waveform> {
        let x = self.to_real()?;
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        Waveform::from_real(x.into_iter().map(|v| v - mean).collect(), self.sample_rate)
    }

    /// Circularly rotate left by `lag` samples (negative rotates right).
    pub fn rotate(&self, lag: i64) -> Waveform {
        let n = self.samples.len() as i64;
        let shift = ((lag % n) + n) % n;
        let mut samples = Vec::with_capacity(self.samples.len());
        for i in 0..n {
            samples.push(self.samples[((i + shift) % n) as usize]);
        }
        Waveform { samples, sample_rate: self.sample_rate, label: self.label.clone() }
    }
}

/// A binary payload; every element is 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSequence {
    bits: Vec<u8>,
}

impl BitSequence {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("bit sequence must contain at least one bit"));
        }
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("bit values must be 0 or 1, got {bad}")));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}
