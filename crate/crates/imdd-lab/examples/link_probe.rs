//! Sends a plain (un-pre-compensated) OOK frame through the link at several
//! span lengths and counts raw decision errors, with and without the
//! transmitter bandwidth limitation. Dispersion alone closes the eye well
//! before 50 km; the bandwidth limit makes it worse.
//!
//! Run with: cargo run --release --example link_probe

use imdd_lab::channel::{
    simulate_link, BlFilterSpec, BlModel, BlPlacement, FiberParams, LinkConfig, NoiseSpec,
};
use imdd_lab::precomp::ook_target;
use imdd_lab::rxdsp::{count_ber, decide_ook, downsample, synchronize};
use imdd_lab::signal::generate_prbs;

fn main() -> imdd_lab::Result<()> {
    let baud = 32e9;
    let sps = 2;
    let bits = generate_prbs(15, 1, 8192)?;
    let drive = ook_target(&bits, baud, sps, 2.5)?;
    let reference = drive.remove_mean()?;

    println!("32 GBd OOK, no pre-compensation, no equalizer, noiseless link");
    println!("{:>10} {:>16} {:>16}", "span", "BER (no BL)", "BER (9 GHz BL)");

    for &length_km in &[0.0, 10.0, 25.0, 50.0, 80.0] {
        let mut bers = Vec::new();
        for bl in [
            BlModel::Bypass,
            BlModel::SuperGaussian(BlFilterSpec::new(9e9, 16e9)?),
        ] {
            let link = LinkConfig {
                baud,
                sps,
                fiber: FiberParams {
                    length_km,
                    dispersion_ps_nm_km: 17.0,
                    wavelength_nm: 1550.0,
                },
                bl,
                bl_placement: BlPlacement::TxElectrical,
                noise: NoiseSpec { sigma_ref: 0.0, rop_dbm: 0.0, rop_ref_dbm: 0.0, seed: 0 },
            };
            let rx = simulate_link(&drive, &link)?;
            let lag = synchronize(&rx, &reference, 64)?;
            let symbols = downsample(&rx.rotate(lag), sps, Some(0))?;
            let ber = match decide_ook(&symbols) {
                Ok((decided, _)) => {
                    let (errors, total) = count_ber(&bits, &decided)?;
                    errors as f64 / total as f64
                }
                // A fully closed eye: the slicer cannot find two levels.
                Err(_) => 0.5,
            };
            bers.push(ber);
        }
        println!("{:>7} km {:>16.4e} {:>16.4e}", length_km, bers[0], bers[1]);
    }

    println!("\nzero errors at 0 km confirm the back-to-back link is clean;");
    println!("the growing error floor is intersymbol interference, not noise");
    Ok(())
}
