//! Sweeps received optical power for the joint pre-compensation scheme and
//! reads off the receiver sensitivity at the FEC threshold.
//!
//! Run with: cargo run --release --example ber_sweep

use imdd_lab::harness::{run_sweep, ExperimentConfig};
use imdd_lab::rxdsp::{sensitivity_at, Scheme};

fn main() -> imdd_lab::Result<()> {
    let cfg = ExperimentConfig {
        scheme: Scheme::PreBlEdc,
        out_dir: std::path::PathBuf::from("out/ber-sweep-example"),
        ..ExperimentConfig::default()
    };

    println!(
        "sweeping {} points, scheme {}, no receiver equalizer",
        cfg.sweep.values.len(),
        cfg.scheme
    );
    let result = run_sweep(&cfg)?;

    println!("{:>10} {:>12} {:>14} {:>8}", "ROP", "BER", "errors/bits", "status");
    for r in &result.records {
        println!(
            "{:>6} dBm {:>12.4e} {:>14} {:>8}",
            r.rop_dbm,
            r.ber,
            format!("{}/{}", r.bit_errors, r.bits_total),
            r.status.to_string()
        );
    }

    match sensitivity_at(&result.records, cfg.fec_threshold_ber) {
        Ok(rop) => println!(
            "\nsensitivity at BER {:.1e}: {rop:.2} dBm",
            cfg.fec_threshold_ber
        ),
        Err(e) => println!("\nno threshold crossing in this sweep: {e}"),
    }
    println!("report written to {}", cfg.out_dir.join("sweep.csv").display());
    Ok(())
}
