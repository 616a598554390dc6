//! Simulated IM/DD link: electrical bandwidth limitation, ideal intensity
//! modulator, fiber chromatic dispersion, square-law detection, and
//! ROP-referenced additive noise.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::precomp::FirFilter;
use crate::signal::{convolve_same, dft, fft_grid, idft, Waveform};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Fiber span parameters. Dispersion is the usual D coefficient in
/// ps/(nm*km); length 0 gives a back-to-back link.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberParams {
    pub length_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub wavelength_nm: f64,
}

impl FiberParams {
    pub fn validate(&self) -> Result<()> {
        if self.length_km < 0.0 {
            return Err(Error::invalid(format!(
                "fiber length must be nonnegative, got {} km",
                self.length_km
            )));
        }
        if !(self.wavelength_nm > 0.0) {
            return Err(Error::invalid(format!(
                "wavelength must be positive, got {} nm",
                self.wavelength_nm
            )));
        }
        Ok(())
    }

    /// Back-to-back: no fiber.
    pub fn back_to_back() -> Self {
        Self { length_km: 0.0, dispersion_ps_nm_km: 17.0, wavelength_nm: 1550.0 }
    }
}

/// Super-Gaussian low-pass magnitude response pinned to two measured power
/// points: |H(f_3dB)|^2 = 0.5 and |H(f_10dB)|^2 = 0.1. The exponent is
/// derived from the pair, the phase is zero (delay-normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct BlFilterSpec {
    pub f_3db_hz: f64,
    pub f_10db_hz: f64,
}

impl BlFilterSpec {
    pub fn new(f_3db_hz: f64, f_10db_hz: f64) -> Result<Self> {
        let spec = Self { f_3db_hz, f_10db_hz };
        spec.order()?;
        Ok(spec)
    }

    /// Super-Gaussian exponent n solving |H(f_10dB)|^2 = 0.1 given
    /// |H(f)|^2 = exp(-ln2 * (f/f_3dB)^(2n)).
    pub fn order(&self) -> Result<f64> {
        if !(self.f_3db_hz > 0.0) || self.f_10db_hz <= self.f_3db_hz {
            return Err(Error::invalid(format!(
                "bandwidth points must satisfy 0 < f_3dB < f_10dB, got {} / {} Hz",
                self.f_3db_hz, self.f_10db_hz
            )));
        }
        let ratio = self.f_10db_hz / self.f_3db_hz;
        Ok((10.0f64.log2()).ln() / (2.0 * ratio.ln()))
    }
}

/// How the bandwidth limitation is modeled.
#[derive(Debug, Clone, PartialEq)]
pub enum BlModel {
    /// Two-point super-Gaussian fit, applied as a zero-phase frequency
    /// response.
    SuperGaussian(BlFilterSpec),
    /// Explicit FIR at the link sample rate (synthetic test channels).
    Fir(FirFilter),
    /// No bandwidth limitation.
    Bypass,
}

/// Where the bandwidth limitation acts in the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlPlacement {
    /// On the electrical drive before modulation (default: the narrowband
    /// DAC/amplifier precede the modulator).
    TxElectrical,
    /// On the detected electrical signal.
    RxElectrical,
    /// Half the dB attenuation on each side (frequency-domain models only).
    Split,
}

/// Additive-noise abstraction for the receiver. The detected electrical
/// signal is scaled by g = 10^((rop_dbm - rop_ref_dbm)/10) (optical power
/// appears linearly after square-law detection) and zero-mean Gaussian noise
/// of standard deviation `sigma_ref` is added.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub sigma_ref: f64,
    pub rop_dbm: f64,
    pub rop_ref_dbm: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_ref < 0.0 {
            return Err(Error::invalid(format!(
                "noise sigma must be nonnegative, got {}",
                self.sigma_ref
            )));
        }
        Ok(())
    }

    /// Electrical gain applied to the detected signal.
    pub fn gain(&self) -> f64 {
        10f64.powf((self.rop_dbm - self.rop_ref_dbm) / 10.0)
    }
}

/// Full link parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub baud: f64,
    pub sps: usize,
    pub fiber: FiberParams,
    pub bl: BlModel,
    pub bl_placement: BlPlacement,
    pub noise: NoiseSpec,
}

impl LinkConfig {
    pub fn sample_rate(&self) -> f64 {
        self.baud * self.sps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.baud > 0.0) {
            return Err(Error::invalid(format!("baud rate must be positive, got {}", self.baud)));
        }
        if self.sps < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples per symbol for the pre-distorted spectrum, got {}",
                self.sps
            )));
        }
        self.fiber.validate()?;
        self.noise.validate()?;
        if let BlModel::SuperGaussian(spec) = &self.bl {
            spec.order()?;
        }
        if matches!(self.bl_placement, BlPlacement::Split) && matches!(self.bl, BlModel::Fir(_)) {
            return Err(Error::invalid(
                "split placement is defined for frequency-domain bandwidth models only",
            ));
        }
        Ok(())
    }
}

/// A sampled frequency response on an explicit two-sided DFT grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqResponse {
    grid: Vec<f64>,
    values: Vec<Complex64>,
}

impl FreqResponse {
    pub fn new(grid: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::invalid(format!(
                "frequency grid length {} does not match value count {}",
                grid.len(),
                values.len()
            )));
        }
        if grid.is_empty() {
            return Err(Error::invalid("frequency response must cover at least one bin"));
        }
        Ok(Self { grid, values })
    }

    pub fn identity(grid: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Bin-wise product; the grids must match exactly.
    pub fn multiply(&self, other: &FreqResponse) -> Result<FreqResponse> {
        if self.grid != other.grid {
            return Err(Error::invalid("frequency responses are on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        FreqResponse::new(self.grid.clone(), values)
    }

    /// Applies the response to a same-length spectrum.
    pub fn apply_spectrum(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
        if spectrum.len() != self.values.len() {
            return Err(Error::invalid(format!(
                "spectrum length {} does not match response length {}",
                spectrum.len(),
                self.values.len()
            )));
        }
        Ok(spectrum.iter().zip(&self.values).map(|(s, h)| s * h).collect())
    }
}

/// Chromatic-dispersion transfer function on the field:
/// H_CD(f) = exp(+j * pi * lambda^2 * D * L * f^2 / c). All-pass.
pub fn cd_response(fiber: &FiberParams, grid: &[f64]) -> Result<FreqResponse> {
    fiber.validate()?;
    let lambda_m = fiber.wavelength_nm * 1e-9;
    let d_s_per_m2 = fiber.dispersion_ps_nm_km * 1e-6;
    let length_m = fiber.length_km * 1e3;
    let coeff =
        std::f64::consts::PI * lambda_m * lambda_m * d_s_per_m2 * length_m / SPEED_OF_LIGHT;
    let values = grid.iter().map(|&f| Complex64::from_polar(1.0, coeff * f * f)).collect();
    FreqResponse::new(grid.to_vec(), values)
}

/// Super-Gaussian bandwidth limitation, zero phase:
/// |H(f)| = exp(-ln2/2 * |f/f_3dB|^(2n)).
pub fn bl_response(spec: &BlFilterSpec, grid: &[f64]) -> Result<FreqResponse> {
    let order = spec.order()?;
    let ln2 = std::f64::consts::LN_2;
    let values = grid
        .iter()
        .map(|&f| {
            let mag = (-0.5 * ln2 * (f / spec.f_3db_hz).abs().powf(2.0 * order)).exp();
            Complex64::new(mag, 0.0)
        })
        .collect();
    FreqResponse::new(grid.to_vec(), values)
}

/// Ideal chirp-free field modulator: field amplitude = max(drive, 0).
/// Returns the field and the number of clipped samples.
pub fn modulate(drive: &Waveform) -> Result<(Waveform, usize)> {
    let xs = drive.to_real()?;
    let clipped = xs.iter().filter(|&&v| v < 0.0).count();
    let field = Waveform::from_real(xs.into_iter().map(|v| v.max(0.0)).collect(), drive.sample_rate())?;
    Ok((field, clipped))
}

/// Square-law detection: output[n] = |field[n]|^2.
pub fn photodetect(field: &Waveform) -> Waveform {
    let samples: Vec<f64> = field.samples().iter().map(|s| s.norm_sqr()).collect();
    Waveform::from_real(samples, field.sample_rate())
        .expect("photodetector output inherits a valid waveform")
}

/// y[n] = g * x[n] + w[n] with g the ROP-referenced electrical gain and w
/// zero-mean Gaussian of std `sigma_ref`. Deterministic for a fixed seed.
pub fn add_noise(x: &Waveform, noise: &NoiseSpec) -> Result<Waveform> {
    noise.validate()?;
    let xs = x.to_real()?;
    let g = noise.gain();
    let out: Vec<f64> = if noise.sigma_ref == 0.0 {
        if g == 1.0 {
            xs
        } else {
            xs.into_iter().map(|v| g * v).collect()
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, noise.sigma_ref)
            .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
        xs.into_iter().map(|v| g * v + normal.sample(&mut rng)).collect()
    };
    Waveform::from_real(out, x.sample_rate())
}

/// Applies a zero-phase/Hermitian response to a real waveform in the
/// frequency domain; the output is forced exactly real.
fn apply_response_real(x: &Waveform, response: &FreqResponse) -> Result<Waveform> {
    let spec = dft(x.samples());
    let filtered = response.apply_spectrum(&spec)?;
    let time = idft(&filtered);
    Waveform::from_real(time.iter().map(|v| v.re).collect(), x.sample_rate())
}

fn sqrt_magnitude(response: &FreqResponse) -> FreqResponse {
    let values = response.values().iter().map(|v| Complex64::new(v.norm().sqrt(), 0.0)).collect();
    FreqResponse::new(response.grid().to_vec(), values)
        .expect("square-root response keeps the grid")
}

fn bl_filter_electrical(
    x: &Waveform,
    cfg: &LinkConfig,
    grid: &[f64],
    halved: bool,
) -> Result<Waveform> {
    match &cfg.bl {
        BlModel::Bypass => Ok(x.clone()),
        BlModel::Fir(fir) => convolve_same(x, fir.taps(), fir.delay()),
        BlModel::SuperGaussian(spec) => {
            let resp = bl_response(spec, grid)?;
            let resp = if halved { sqrt_magnitude(&resp) } else { resp };
            apply_response_real(x, &resp)
        }
    }
}

/// Everything the link does to a drive waveform before noise is added:
/// bandwidth limitation at its configured placement, modulation, fiber
/// dispersion, square-law detection, and AC coupling.
pub fn simulate_link_clean(tx: &Waveform, cfg: &LinkConfig) -> Result<LinkRun> {
    cfg.validate()?;
    let fs = cfg.sample_rate();
    if (tx.sample_rate() - fs).abs() > 1e-6 * fs {
        return Err(Error::invalid(format!(
            "drive sample rate {} does not match link rate {}",
            tx.sample_rate(),
            fs
        )));
    }
    if !tx.is_real() {
        return Err(Error::invalid("drive waveform must be real"));
    }
    let grid = fft_grid(tx.len(), fs);

    let drive = match cfg.bl_placement {
        BlPlacement::TxElectrical => bl_filter_electrical(tx, cfg, &grid, false)?,
        BlPlacement::Split => bl_filter_electrical(tx, cfg, &grid, true)?,
        BlPlacement::RxElectrical => tx.clone(),
    };

    let (field, clipped) = modulate(&drive)?;

    let dispersed = if cfg.fiber.length_km == 0.0 {
        field
    } else {
        let h_cd = cd_response(&cfg.fiber, &grid)?;
        let spec = dft(field.samples());
        Waveform::new(idft(&h_cd.apply_spectrum(&spec)?), fs)?
    };

    let detected = photodetect(&dispersed);
    let coupled = detected.remove_mean()?;

    let output = match cfg.bl_placement {
        BlPlacement::RxElectrical => bl_filter_electrical(&coupled, cfg, &grid, false)?,
        BlPlacement::Split => bl_filter_electrical(&coupled, cfg, &grid, true)?,
        BlPlacement::TxElectrical => coupled,
    };
    Ok(LinkRun { output, clipped })
}

/// A clean link run: the noiseless AC-coupled detected signal plus the
/// modulator clipping count.
#[derive(Debug, Clone)]
pub struct LinkRun {
    pub output: Waveform,
    pub clipped: usize,
}

/// Full link: `simulate_link_clean` followed by ROP gain and additive noise.
pub fn simulate_link(tx: &Waveform, cfg: &LinkConfig) -> Result<Waveform> {
    let run = simulate_link_clean(tx, cfg)?;
    add_noise(&run.output, &cfg.noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::fft_grid;

    fn default_fiber() -> FiberParams {
        FiberParams { length_km: 50.0, dispersion_ps_nm_km: 17.0, wavelength_nm: 1550.0 }
    }

    #[test]
    fn cd_is_allpass_and_identity_at_zero_length() {
        let grid = fft_grid(256, 64e9);
        let h = cd_response(&default_fiber(), &grid).unwrap();
        for v in h.values() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let h0 = cd_response(&FiberParams { length_km: 0.0, ..default_fiber() }, &grid).unwrap();
        for v in h0.values() {
            assert_eq!(*v, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn cd_phase_spot_value() {
        // pi * lambda^2 * D * L * f^2 / c at (17 ps/nm/km, 50 km, 1550 nm,
        // 10 GHz) evaluates to about 2.14 rad.
        let h = cd_response(&default_fiber(), &[10e9]).unwrap();
        let phase = h.values()[0].arg();
        assert!((phase - 2.14).abs() < 1e-3, "phase {phase}");
    }

    #[test]
    fn cd_phase_additive_in_length() {
        let grid = fft_grid(128, 64e9);
        let h1 = cd_response(&FiberParams { length_km: 20.0, ..default_fiber() }, &grid).unwrap();
        let h2 = cd_response(&FiberParams { length_km: 30.0, ..default_fiber() }, &grid).unwrap();
        let h12 = cd_response(&FiberParams { length_km: 50.0, ..default_fiber() }, &grid).unwrap();
        let prod = h1.multiply(&h2).unwrap();
        for (a, b) in prod.values().iter().zip(h12.values()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn bl_fit_hits_both_power_points() {
        let spec = BlFilterSpec::new(9e9, 16e9).unwrap();
        let n = spec.order().unwrap();
        assert!((n - 1.04).abs() < 0.01, "order {n}");
        let h = bl_response(&spec, &[0.0, 9e9, 16e9]).unwrap();
        assert!((h.values()[0].norm() - 1.0).abs() < 1e-12);
        assert!((h.values()[1].norm_sqr() - 0.5).abs() < 1e-9);
        assert!((h.values()[2].norm_sqr() - 0.1).abs() < 1e-9);
        assert!(BlFilterSpec::new(16e9, 9e9).is_err());
    }

    #[test]
    fn bl_order_matches_bisection_oracle() {
        // Independent one-dimensional root solve of
        // exp(-ln2 * (f10/f3)^(2n)) = 0.1.
        let (f3, f10) = (9e9f64, 16e9f64);
        let target = |n: f64| (-(std::f64::consts::LN_2) * (f10 / f3).powf(2.0 * n)).exp() - 0.1;
        let (mut lo, mut hi) = (0.1f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if target(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let n = BlFilterSpec::new(f3, f10).unwrap().order().unwrap();
        assert!((n - oracle).abs() < 1e-9, "{n} vs {oracle}");
    }

    #[test]
    fn bl_never_amplifies() {
        let spec = BlFilterSpec::new(9e9, 16e9).unwrap();
        let grid = fft_grid(4096, 64e9);
        let h = bl_response(&spec, &grid).unwrap();
        assert!(h.values().iter().all(|v| v.norm() <= 1.0 + 1e-15));
        // Energy through the filter can only shrink.
        let xs: Vec<f64> = (0..4096).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let w = Waveform::from_real(xs, 64e9).unwrap();
        let y = apply_response_real(&w, &h).unwrap();
        assert!(y.energy() <= w.energy() + 1e-9);
    }

    #[test]
    fn modulate_clips_and_counts() {
        let w = Waveform::from_real(vec![-0.1, 0.5], 1.0).unwrap();
        let (field, clipped) = modulate(&w).unwrap();
        assert_eq!(field.real_part(), vec![0.0, 0.5]);
        assert_eq!(clipped, 1);
        let w = Waveform::from_real(vec![0.3, 0.0, 1.2], 1.0).unwrap();
        let (field, clipped) = modulate(&w).unwrap();
        assert_eq!(field.real_part(), vec![0.3, 0.0, 1.2]);
        assert_eq!(clipped, 0);
    }

    #[test]
    fn photodetect_is_square_law_and_phase_blind() {
        let f = Waveform::new(
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)],
            1.0,
        )
        .unwrap();
        let p = photodetect(&f);
        assert_eq!(p.real_part(), vec![1.0, 4.0]);

        let rot = Waveform::new(
            f.samples().iter().map(|s| s * Complex64::from_polar(1.0, 0.7)).collect(),
            1.0,
        )
        .unwrap();
        let p2 = photodetect(&rot);
        for (a, b) in p.real_part().iter().zip(p2.real_part()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_identity_when_disabled() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64 * 0.1).collect();
        let w = Waveform::from_real(xs.clone(), 1.0).unwrap();
        let spec = NoiseSpec { sigma_ref: 0.0, rop_dbm: -3.0, rop_ref_dbm: -3.0, seed: 1 };
        let y = add_noise(&w, &spec).unwrap();
        assert_eq!(y.real_part(), xs);
    }

    #[test]
    fn noise_moments() {
        let n = 1_000_000;
        let w = Waveform::from_real(vec![0.0; n], 1.0).unwrap();
        let sigma = 0.05;
        let spec = NoiseSpec { sigma_ref: sigma, rop_dbm: 0.0, rop_ref_dbm: 0.0, seed: 7 };
        let y = add_noise(&w, &spec).unwrap();
        let xs = y.real_part();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * sigma / 1000.0, "mean {mean}");
        assert!((var.sqrt() - sigma).abs() / sigma < 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn noise_gain_scales_signal() {
        let w = Waveform::from_real(vec![2.0; 8], 1.0).unwrap();
        let spec = NoiseSpec { sigma_ref: 0.0, rop_dbm: -10.0, rop_ref_dbm: 0.0, seed: 0 };
        let y = add_noise(&w, &spec).unwrap();
        for v in y.real_part() {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn clean_link_collapses_to_square_law() {
        let cfg = LinkConfig {
            baud: 1e9,
            sps: 2,
            fiber: FiberParams { length_km: 0.0, ..default_fiber() },
            bl: BlModel::Bypass,
            bl_placement: BlPlacement::TxElectrical,
            noise: NoiseSpec { sigma_ref: 0.0, rop_dbm: 0.0, rop_ref_dbm: 0.0, seed: 0 },
        };
        let xs = vec![0.5, -0.25, 1.0, 0.0, 0.75, 0.3, 0.9, 0.1];
        let w = Waveform::from_real(xs.clone(), 2e9).unwrap();
        let run = simulate_link_clean(&w, &cfg).unwrap();
        assert_eq!(run.clipped, 1);
        let squared: Vec<f64> = xs.iter().map(|v| v.max(0.0) * v.max(0.0)).collect();
        let mean = squared.iter().sum::<f64>() / squared.len() as f64;
        for (got, want) in run.output.real_part().iter().zip(&squared) {
            assert!((got - (want - mean)).abs() < 1e-12);
        }
        assert_eq!(run.output.len(), w.len());
    }

    #[test]
    fn link_is_deterministic() {
        let cfg = LinkConfig {
            baud: 1e9,
            sps: 2,
            fiber: default_fiber(),
            bl: BlModel::SuperGaussian(BlFilterSpec::new(0.3e9, 0.5e9).unwrap()),
            bl_placement: BlPlacement::TxElectrical,
            noise: NoiseSpec { sigma_ref: 0.02, rop_dbm: -4.0, rop_ref_dbm: 0.0, seed: 11 },
        };
        let xs: Vec<f64> = (0..256).map(|i| ((i % 5) as f64) * 0.2).collect();
        let w = Waveform::from_real(xs, 2e9).unwrap();
        let a = simulate_link(&w, &cfg).unwrap();
        let b = simulate_link(&w, &cfg).unwrap();
        assert_eq!(a.real_part(), b.real_part());
    }

    #[test]
    fn link_rejects_mismatched_rate() {
        let cfg = LinkConfig {
            baud: 1e9,
            sps: 2,
            fiber: default_fiber(),
            bl: BlModel::Bypass,
            bl_placement: BlPlacement::TxElectrical,
            noise: NoiseSpec { sigma_ref: 0.0, rop_dbm: 0.0, rop_ref_dbm: 0.0, seed: 0 },
        };
        let w = Waveform::from_real(vec![1.0; 16], 1e9).unwrap();
        assert!(simulate_link(&w, &cfg).is_err());
    }
}
