//! Runs the two-phase joint pre-compensation with an explicit tap-file
//! handoff: Phase I learns the bandwidth-limitation model, the taps go to
//! disk, and Phase II rebuilds the drive from the file. The file route must
//! reproduce the in-memory route bit for bit.
//!
//! Run with: cargo run --release --example phase1_handoff

use imdd_lab::harness::{export_taps, import_taps, prepare_scheme, run_phase1, ExperimentConfig};
use imdd_lab::rxdsp::Scheme;

fn main() -> imdd_lab::Result<()> {
    let cfg = ExperimentConfig {
        scheme: Scheme::PreBlEdc,
        out_dir: std::path::PathBuf::from("out/phase1-handoff"),
        ..ExperimentConfig::default()
    };
    std::fs::create_dir_all(&cfg.out_dir).expect("create output directory");

    // Phase I: noiseless training against the configured link.
    let h_bl = run_phase1(&cfg)?;
    println!(
        "phase I: {} symbol-spaced taps (reference delay {})",
        h_bl.len(),
        h_bl.delay()
    );
    let peak = h_bl.taps().iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    for (i, &t) in h_bl.taps().iter().enumerate() {
        if t.abs() >= 0.05 * peak {
            println!("  tap[{i:>2}] = {t:+.5}");
        }
    }

    // Handoff through a tap file.
    let path = cfg.out_dir.join("h_bl.taps");
    export_taps(&h_bl, &path)?;
    let reloaded = import_taps(&path)?;
    println!("exported {} and re-imported {} taps", path.display(), reloaded.len());

    // Phase II both ways: inline training vs. the stored file.
    let inline = prepare_scheme(&cfg, Scheme::PreBlEdc, cfg.baud)?;
    let mut from_file = cfg.clone();
    from_file.phase1.taps_file = Some(path);
    let filed = prepare_scheme(&from_file, Scheme::PreBlEdc, from_file.baud)?;

    let identical = inline.drive.len() == filed.drive.len()
        && inline
            .drive
            .samples()
            .iter()
            .zip(filed.drive.samples())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
    println!(
        "phase II drive: {} samples, file route bit-identical to memory route: {identical}",
        inline.drive.len()
    );
    Ok(())
}
