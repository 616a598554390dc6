//! Pre-distorts an OOK amplitude target against 50 km of chromatic
//! dispersion and reports how the error-reversal iteration converges.
//!
//! Run with: cargo run --release --example predistort_basics

use imdd_lab::channel::{cd_response, FiberParams};
use imdd_lab::precomp::{gs_predistort_traced, ook_target, GsConfig};
use imdd_lab::signal::{fft_grid, generate_prbs};

fn main() -> imdd_lab::Result<()> {
    // A frame of PRBS-15 bits shaped into the biased amplitude target the
    // square-law receiver should see.
    let bits = generate_prbs(15, 1, 2048)?;
    let target = ook_target(&bits, 32e9, 2, 2.5)?;

    let fiber = FiberParams { length_km: 50.0, dispersion_ps_nm_km: 17.0, wavelength_nm: 1550.0 };
    let grid = fft_grid(target.len(), target.sample_rate());
    let forward = cd_response(&fiber, &grid)?;

    let cfg = GsConfig::default();
    let (drive, trace) = gs_predistort_traced(&target, &forward, &cfg)?;

    println!(
        "target: {} samples at {:.0} GS/s, {} bits at 32 GBd",
        target.len(),
        target.sample_rate() / 1e9,
        bits.len()
    );
    println!(
        "forward operator: {:.0} km span, D = {} ps/nm/km (all-pass)",
        fiber.length_km, fiber.dispersion_ps_nm_km
    );
    println!(
        "iteration: {} steps, alpha_amp = {}, alpha_phase = {}",
        cfg.n_iter, cfg.alpha_amp, cfg.alpha_phase
    );

    println!("\nrelative receiver-amplitude residual:");
    for &i in &[0usize, 1, 2, 5, 10, 20, 50, 100, 200] {
        if let Some(r) = trace.residuals.get(i) {
            println!("  after {i:>3} iterations: {r:.4e}");
        }
    }

    let samples = drive.to_real()?;
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    println!("\ndrive: mean power {:.6}, samples in [{min:.4}, {max:.4}]", drive.mean_power());
    println!("the drive is real and nonnegative, ready for an intensity modulator");
    Ok(())
}
