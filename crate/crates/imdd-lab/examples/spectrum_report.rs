//! Compares the two pre-distorted drives in the frequency domain: how much
//! energy each pushes above the half-baud line, and how flat the received
//! spectrum comes out after the bandwidth-limited link.
//!
//! Run with: cargo run --release --example spectrum_report

use imdd_lab::harness::{run_spectrum_report, ExperimentConfig};

fn main() -> imdd_lab::Result<()> {
    let cfg = ExperimentConfig {
        out_dir: std::path::PathBuf::from("out/spectrum-example"),
        ..ExperimentConfig::default()
    };

    let report = run_spectrum_report(&cfg)?;

    println!(
        "drive energy fraction above {:.0} GHz (pre-emphasis strength):",
        cfg.baud / 4.0 / 1e9
    );
    println!("  modified-gs  {:.4}", report.high_band_fraction[0]);
    println!("  pre-bl-edc   {:.4}", report.high_band_fraction[1]);

    println!("\nreceived dB-PSD variance over the low band (flatness, lower is flatter):");
    println!("  modified-gs  {:.3}", report.rx_flatness_db_var[0]);
    println!("  pre-bl-edc   {:.3}", report.rx_flatness_db_var[1]);

    // A coarse picture of the two drive spectra on a shared dB scale. Each row
    // averages a block of bins in linear power, which tames the periodogram
    // scatter of any single bin.
    println!("\ndrive PSD (dB per 2 GHz block, relative to the strongest block):");
    let block = report.freq.len() / 16;
    let band_avg = |psd: &[f64], start: usize| {
        let end = (start + block).min(psd.len());
        psd[start..end].iter().sum::<f64>() / (end - start) as f64
    };
    let blocks: Vec<(f64, f64, f64)> = (0..report.freq.len())
        .step_by(block)
        .map(|i| {
            (
                report.freq[i],
                band_avg(&report.tx_psd[0], i),
                band_avg(&report.tx_psd[1], i),
            )
        })
        .collect();
    let peak = blocks.iter().fold(0.0f64, |m, b| m.max(b.1).max(b.2));
    let db = |p: f64| 10.0 * (p / peak).max(1e-12).log10();
    println!("{:>9} {:>13} {:>13}", "freq", "modified-gs", "pre-bl-edc");
    for (f, a, b) in &blocks {
        println!("{:>6.1} GHz {:>10.1} dB {:>10.1} dB", f / 1e9, db(*a), db(*b));
    }

    println!(
        "\nfull reports: {} and {}",
        cfg.out_dir.join("spectrum_tx.csv").display(),
        cfg.out_dir.join("spectrum_rx.csv").display()
    );
    Ok(())
}
