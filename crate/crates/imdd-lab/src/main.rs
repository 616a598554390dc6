//! Thin command-line front end over the `imdd_lab` library. All logic lives
//! in the library; this binary parses flags, resolves a config, dispatches,
//! and maps errors to exit codes (2 = config/usage, 3 = measurement failed).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use imdd_lab::harness::config::ExperimentConfig;
use imdd_lab::harness::io::{self, WaveformFormat};
use imdd_lab::harness::run::{self, TOOL_VERSION};
use imdd_lab::rxdsp::{BerRecord, RunStatus};
use imdd_lab::Error;

#[derive(Parser)]
#[command(name = "imdd-lab", version, about = "IM/DD OOK link laboratory: \
bandwidth-limitation and chromatic-dispersion pre-compensation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (key = value lines). Defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` from the config).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Master seed (overrides `seed` from the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Pre-compensation scheme: none | modified-gs | pre-bl-edc.
    #[arg(long)]
    scheme: Option<String>,
    /// Set one config key, repeatable: --override gs.n_iter=300
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.overrides {
            cfg.apply_override(kv)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(scheme) = &self.scheme {
            cfg.scheme = scheme.parse()?;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Measure BER at the configured operating point; writes simulate.csv.
    Simulate(Common),
    /// Sweep ROP or baud rate; writes sweep.csv.
    Sweep(Common),
    /// Compare drive and received spectra of both pre-compensation schemes;
    /// writes spectrum_tx.csv and spectrum_rx.csv.
    Spectrum(Common),
    /// Train the Phase-I equalizer against the configured link and export
    /// the learned bandwidth-limitation taps; writes h_bl_taps.csv.
    #[command(name = "phase1-train")]
    Phase1Train(Common),
    /// Export the pre-distorted transmit waveform for the configured scheme.
    ExportWaveform {
        #[command(flatten)]
        common: Common,
        /// File format: csv (text, lossless) or raw (binary doubles).
        #[arg(long, default_value = "csv")]
        format: WaveformFormat,
        /// Output file name (relative names land in the output directory).
        #[arg(long)]
        out_file: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(c) => simulate(&c),
        Command::Sweep(c) => sweep(&c),
        Command::Spectrum(c) => spectrum(&c),
        Command::Phase1Train(c) => phase1_train(&c),
        Command::ExportWaveform { common, format, out_file } => {
            export_waveform(&common, format, out_file)
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_for(&err)
        }
    }
}

/// Config, usage and I/O problems are exit 2; everything else (sync loss,
/// diverged training, unreachable target) is exit 3.
fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Io { .. } => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn is_setup_error(err: &Error) -> bool {
    matches!(err, Error::Config { .. } | Error::InvalidArgument(_) | Error::Io { .. })
}

fn provenance(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    vec![
        ("tool_version".to_string(), TOOL_VERSION.to_string()),
        ("fingerprint".to_string(), format!("{:016x}", cfg.fingerprint())),
        ("timestamp".to_string(), format!("unix:{ts}")),
    ]
}

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<(), Error> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::Io { path: cfg.out_dir.clone(), source: e })
}

fn describe(r: &BerRecord) -> String {
    format!(
        "rop={:+.2} dBm baud={:.3e} scheme={} ffe={} ber={:.4e} ({}/{}) status={}",
        r.rop_dbm,
        r.baud,
        r.scheme,
        if r.ffe_used { r.ffe_taps.to_string() } else { "off".to_string() },
        r.ber,
        r.bit_errors,
        r.bits_total,
        r.status
    )
}

fn simulate(common: &Common) -> Result<ExitCode, Error> {
    let cfg = common.resolve()?;
    ensure_out_dir(&cfg)?;
    let record = match run::run_single(&cfg) {
        Ok(record) => record,
        Err(err) if is_setup_error(&err) => return Err(err),
        Err(err) => {
            // Measurement-stage failure: still write the record so the
            // operating point shows up in the report with its status.
            eprintln!("error: {err}");
            BerRecord {
                rop_dbm: cfg.rop_dbm,
                baud: cfg.baud,
                scheme: cfg.scheme,
                ffe_used: cfg.ffe_enabled(cfg.scheme),
                ffe_taps: 0,
                bit_errors: 0,
                bits_total: 0,
                ber: 0.0,
                status: RunStatus::from_error(&err),
            }
        }
    };
    let path = cfg.out_dir.join("simulate.csv");
    io::write_ber_csv(std::slice::from_ref(&record), cfg.fingerprint(), TOOL_VERSION, &path)?;
    println!("{}", describe(&record));
    println!("wrote {}", path.display());
    Ok(if record.status.is_ok() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn sweep(common: &Common) -> Result<ExitCode, Error> {
    let cfg = common.resolve()?;
    let result = run::run_sweep(&cfg)?;
    for record in &result.records {
        println!("{}", describe(record));
    }
    println!("wrote {}", cfg.out_dir.join("sweep.csv").display());
    let all_ok = result.records.iter().all(|r| r.status.is_ok());
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn spectrum(common: &Common) -> Result<ExitCode, Error> {
    let cfg = common.resolve()?;
    let report = run::run_spectrum_report(&cfg)?;
    println!(
        "high-band fraction: modified-gs={:.4} pre-bl-edc={:.4}",
        report.high_band_fraction[0], report.high_band_fraction[1]
    );
    println!(
        "rx dB-PSD variance: modified-gs={:.4} pre-bl-edc={:.4}",
        report.rx_flatness_db_var[0], report.rx_flatness_db_var[1]
    );
    println!(
        "wrote {} and {}",
        cfg.out_dir.join("spectrum_tx.csv").display(),
        cfg.out_dir.join("spectrum_rx.csv").display()
    );
    Ok(ExitCode::SUCCESS)
}

fn phase1_train(common: &Common) -> Result<ExitCode, Error> {
    let cfg = common.resolve()?;
    let taps = run::run_phase1(&cfg)?;
    ensure_out_dir(&cfg)?;
    let path = cfg.out_dir.join("h_bl_taps.csv");
    io::export_taps_with_comments(&taps, &path, &provenance(&cfg))?;
    println!("trained {} taps (delay {})", taps.len(), taps.delay());
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn export_waveform(
    common: &Common,
    format: WaveformFormat,
    out_file: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let cfg = common.resolve()?;
    let prepared = run::prepare_scheme(&cfg, cfg.scheme, cfg.baud)?;
    let name = out_file.unwrap_or_else(|| {
        PathBuf::from(match format {
            WaveformFormat::Csv => "waveform.csv",
            WaveformFormat::Raw => "waveform.raw",
        })
    });
    ensure_out_dir(&cfg)?;
    let path = cfg.out_dir.join(name);
    io::export_waveform_with_comments(&prepared.drive, &path, format, &provenance(&cfg))?;
    println!(
        "wrote {} ({} samples at {:.3e} Hz, scheme {})",
        path.display(),
        prepared.drive.len(),
        prepared.drive.sample_rate(),
        cfg.scheme
    );
    Ok(ExitCode::SUCCESS)
}
