//! File formats: waveform exports (text and binary), tap files, and the
//! CSV reports. Every text format round-trips bit-exactly; binary uses
//! little-endian IEEE-754 doubles behind a 16-byte header.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::precomp::FirFilter;
use crate::rxdsp::BerRecord;
use crate::signal::Waveform;

/// Magic prefix of the binary waveform format.
const RAW_MAGIC: &[u8; 4] = b"PBLW";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveformFormat {
    Csv,
    Raw,
}

impl FromStr for WaveformFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(WaveformFormat::Csv),
            "raw" => Ok(WaveformFormat::Raw),
            other => Err(Error::invalid(format!(
                "unknown waveform format '{other}' (expected csv or raw)"
            ))),
        }
    }
}

/// Writes a real waveform. `csv`: `# samples=<N> fs=<Hz>` header, then one
/// sample per line at 17 significant digits (lossless for f64). `raw`:
/// 16-byte header (magic `PBLW`, u64-LE sample count, 4 reserved zero
/// bytes) followed by the samples as little-endian f64. Extra `comments`
/// become `# key=value` lines after the csv header; the raw layout has no
/// room for them.
pub fn export_waveform_with_comments(
    w: &Waveform,
    path: &Path,
    format: WaveformFormat,
    comments: &[(String, String)],
) -> Result<()> {
    let samples = w.to_real()?;
    match format {
        WaveformFormat::Csv => {
            let mut text = format!("# samples={} fs={}\n", samples.len(), w.sample_rate());
            for (key, value) in comments {
                let _ = writeln!(text, "# {key}={value}");
            }
            for s in &samples {
                let _ = writeln!(text, "{s:.16e}");
            }
            std::fs::write(path, text).map_err(|e| Error::io(path, e))
        }
        WaveformFormat::Raw => {
            let mut bytes = Vec::with_capacity(16 + 8 * samples.len());
            bytes.extend_from_slice(RAW_MAGIC);
            bytes.extend_from_slice(&(samples.len() as u64).to_le_bytes());
            bytes.extend_from_slice(&[0u8; 4]);
            for s in &samples {
                bytes.extend_from_slice(&s.to_le_bytes());
            }
            std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
    }
}

pub fn export_waveform(w: &Waveform, path: &Path, format: WaveformFormat) -> Result<()> {
    export_waveform_with_comments(w, path, format, &[])
}

/// Reads a waveform back, sniffing the format from the magic bytes. Raw
/// files carry no sample rate; they come back at 1 Hz.
pub fn import_waveform(path: &Path) -> Result<Waveform> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() >= 4 && &bytes[..4] == RAW_MAGIC {
        return import_raw(path, &bytes);
    }
    let text = String::from_utf8(bytes).map_err(|_| {
        Error::config(format!(
            "waveform file {} is neither raw (no magic) nor text",
            path.display()
        ))
    })?;
    import_waveform_csv(path, &text)
}

fn import_raw(path: &Path, bytes: &[u8]) -> Result<Waveform> {
    let context = |msg: String| Error::config(format!("raw file {}: {msg}", path.display()));
    if bytes.len() < 16 {
        return Err(context(format!("header truncated ({} bytes)", bytes.len())));
    }
    let count = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    if bytes[12..16] != [0u8; 4] {
        return Err(context("reserved header bytes are not zero".to_string()));
    }
    let expected = 16 + 8 * count;
    if bytes.len() != expected {
        return Err(context(format!(
            "expected {expected} bytes for {count} samples, found {}",
            bytes.len()
        )));
    }
    let samples: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Waveform::from_real(samples, 1.0)
}

fn import_waveform_csv(path: &Path, text: &str) -> Result<Waveform> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(Error::config(format!("waveform file {} is empty", path.display())));
    };
    let mut samples_declared: Option<usize> = None;
    let mut fs: Option<f64> = None;
    for token in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = token.strip_prefix("samples=") {
            samples_declared = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("fs=") {
            fs = v.parse().ok();
        }
    }
    let (Some(count), Some(fs)) = (samples_declared, fs) else {
        return Err(Error::config_at(
            1,
            format!(
                "waveform file {}: header must be '# samples=<N> fs=<Hz>'",
                path.display()
            ),
        ));
    };
    let mut samples = Vec::with_capacity(count);
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Error::config_at(
                idx + 1,
                format!("waveform file {}: bad sample '{line}'", path.display()),
            )
        })?;
        samples.push(v);
    }
    if samples.len() != count {
        return Err(Error::config(format!(
            "waveform file {}: header declares {count} samples, found {}",
            path.display(),
            samples.len()
        )));
    }
    Waveform::from_real(samples, fs)
}

/// Writes a tap file: `# delay=<d>` then one tap per line (17 significant
/// digits). Extra comments follow the header.
pub fn export_taps_with_comments(
    h: &FirFilter,
    path: &Path,
    comments: &[(String, String)],
) -> Result<()> {
    let mut text = format!("# delay={}\n", h.delay());
    for (key, value) in comments {
        let _ = writeln!(text, "# {key}={value}");
    }
    for t in h.taps() {
        let _ = writeln!(text, "{t:.16e}");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn export_taps(h: &FirFilter, path: &Path) -> Result<()> {
    export_taps_with_comments(h, path, &[])
}

pub fn import_taps(path: &Path) -> Result<FirFilter> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut delay: Option<usize> = None;
    let mut taps = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("delay=") {
                delay = Some(v.parse().map_err(|_| {
                    Error::config_at(
                        idx + 1,
                        format!("taps file {}: bad delay '{v}'", path.display()),
                    )
                })?);
            }
            continue;
        }
        let t: f64 = line.parse().map_err(|_| {
            Error::config_at(
                idx + 1,
                format!("taps file {}: bad tap '{line}'", path.display()),
            )
        })?;
        taps.push(t);
    }
    let Some(delay) = delay else {
        return Err(Error::config(format!(
            "taps file {}: missing '# delay=<d>' header",
            path.display()
        )));
    };
    FirFilter::new(taps, delay)
}

/// The column set of every BER report, in order.
pub const BER_CSV_COLUMNS: &str =
    "rop_dbm,baud,scheme,ffe_used,ffe_taps,bit_errors,bits_total,ber,status";

/// Renders the deterministic part of a BER report (header row + records).
pub fn render_ber_data(records: &[BerRecord]) -> String {
    let mut out = String::from(BER_CSV_COLUMNS);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.10e},{}",
            r.rop_dbm,
            r.baud,
            r.scheme,
            r.ffe_used,
            r.ffe_taps,
            r.bit_errors,
            r.bits_total,
            r.ber,
            r.status
        );
    }
    out
}

fn metadata_comments(fingerprint: u64, tool_version: &str) -> String {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!(
        "# tool_version={tool_version}\n# fingerprint={fingerprint:016x}\n# timestamp=unix:{stamp}\n"
    )
}

/// Writes a BER report CSV: metadata comments (tool version, config
/// fingerprint, timestamp on its own line), then the data section.
pub fn write_ber_csv(
    records: &[BerRecord],
    fingerprint: u64,
    tool_version: &str,
    path: &Path,
) -> Result<()> {
    let text = metadata_comments(fingerprint, tool_version) + &render_ber_data(records);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a multi-column spectrum CSV: `freq_hz` plus one PSD column per
/// label, then label-carrying summary rows (e.g. band fractions) after the
/// numeric rows.
pub fn write_spectrum_csv(
    path: &Path,
    freq: &[f64],
    columns: &[(String, Vec<f64>)],
    summaries: &[(String, Vec<f64>)],
    fingerprint: u64,
    tool_version: &str,
) -> Result<()> {
    for (label, col) in columns {
        if col.len() != freq.len() {
            return Err(Error::invalid(format!(
                "spectrum column '{label}' has {} rows for {} frequencies",
                col.len(),
                freq.len()
            )));
        }
    }
    let mut text = metadata_comments(fingerprint, tool_version);
    text.push_str("freq_hz");
    for (label, _) in columns {
        let _ = write!(text, ",{label}");
    }
    text.push('\n');
    for (i, f) in freq.iter().enumerate() {
        let _ = write!(text, "{f}");
        for (_, col) in columns {
            let _ = write!(text, ",{:.10e}", col[i]);
        }
        text.push('\n');
    }
    for (label, values) in summaries {
        let _ = write!(text, "{label}");
        for v in values {
            let _ = write!(text, ",{v:.10e}");
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Strips the volatile timestamp line; what remains is the determinism
/// contract of every CSV this crate writes.
pub fn csv_data_section(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# timestamp="))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rxdsp::{RunStatus, Scheme};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("imdd-lab-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn csv_waveform_roundtrip_is_bit_exact() {
        let values = vec![
            0.0,
            -0.0,
            1.0 / 3.0,
            std::f64::consts::PI,
            -2.2250738585072014e-308,
            1.7976931348623157e308,
            6.02e23,
        ];
        let w = Waveform::from_real(values.clone(), 64e9).unwrap();
        let path = tmp("wave.csv");
        export_waveform(&w, &path, WaveformFormat::Csv).unwrap();
        let back = import_waveform(&path).unwrap();
        assert_eq!(back.sample_rate(), 64e9);
        for (a, b) in back.real_part().iter().zip(&values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn raw_waveform_roundtrip_and_size() {
        let values: Vec<f64> = (0..257).map(|i| (i as f64).sin()).collect();
        let w = Waveform::from_real(values.clone(), 2.0).unwrap();
        let path = tmp("wave.raw");
        export_waveform(&w, &path, WaveformFormat::Raw).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 16 + 8 * values.len());
        assert_eq!(&bytes[..4], b"PBLW");
        assert_eq!(&bytes[12..16], &[0u8; 4]);
        let back = import_waveform(&path).unwrap();
        // The raw layout stores no sample rate; readers get 1 Hz.
        assert_eq!(back.sample_rate(), 1.0);
        for (a, b) in back.real_part().iter().zip(&values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn raw_rejects_corruption() {
        let w = Waveform::from_real(vec![1.0, 2.0], 1.0).unwrap();
        let path = tmp("corrupt.raw");
        export_waveform(&w, &path, WaveformFormat::Raw).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(import_waveform(&path).is_err());

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(10);
        std::fs::write(&path, &bytes).unwrap();
        assert!(import_waveform(&path).is_err());
    }

    #[test]
    fn csv_comments_are_embedded_and_skipped_on_import() {
        let w = Waveform::from_real(vec![0.5, -0.25], 1e9).unwrap();
        let path = tmp("commented.csv");
        export_waveform_with_comments(
            &w,
            &path,
            WaveformFormat::Csv,
            &[("fingerprint".into(), "deadbeef".into())],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("# fingerprint=deadbeef"));
        let back = import_waveform(&path).unwrap();
        assert_eq!(back.real_part(), vec![0.5, -0.25]);
    }

    #[test]
    fn csv_header_and_count_enforced() {
        let path = tmp("bad_header.csv");
        std::fs::write(&path, "0.5\n0.25\n").unwrap();
        assert!(import_waveform(&path).is_err());
        std::fs::write(&path, "# samples=3 fs=1\n0.5\n0.25\n").unwrap();
        assert!(import_waveform(&path).is_err());
        std::fs::write(&path, "# samples=2 fs=1\n0.5\nnot-a-number\n").unwrap();
        match import_waveform(&path) {
            Err(Error::Config { line: Some(3), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn taps_roundtrip_preserves_delay() {
        let h = FirFilter::new(vec![0.25, 1.0, -0.125, 3.3e-5], 2).unwrap();
        let path = tmp("taps.csv");
        export_taps(&h, &path).unwrap();
        let back = import_taps(&path).unwrap();
        assert_eq!(back.delay(), 2);
        for (a, b) in back.taps().iter().zip(h.taps()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn taps_parse_errors_carry_line_numbers() {
        let path = tmp("bad_taps.csv");
        std::fs::write(&path, "# delay=1\n0.5\nwhat\n").unwrap();
        match import_taps(&path) {
            Err(Error::Config { line: Some(3), .. }) => {}
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "0.5\n0.25\n").unwrap();
        assert!(import_taps(&path).is_err());
        std::fs::write(&path, "# delay=5\n0.5\n0.25\n").unwrap();
        assert!(import_taps(&path).is_err());
    }

    fn record(rop: f64) -> BerRecord {
        BerRecord {
            rop_dbm: rop,
            baud: 32e9,
            scheme: Scheme::ModifiedGs,
            ffe_used: true,
            ffe_taps: 21,
            bit_errors: 120,
            bits_total: 65536,
            ber: 120.0 / 65536.0,
            status: RunStatus::Ok,
        }
    }

    #[test]
    fn ber_csv_schema_and_determinism() {
        let records = vec![record(-10.0), record(-8.0)];
        let data = render_ber_data(&records);
        let mut lines = data.lines();
        assert_eq!(lines.next().unwrap(), BER_CSV_COLUMNS);
        let row = lines.next().unwrap();
        assert!(row.starts_with("-10,32000000000,modified-gs,true,21,120,65536,"));
        assert!(row.ends_with(",ok"));
        assert_eq!(render_ber_data(&records), data);

        let path = tmp("sweep.csv");
        write_ber_csv(&records, 0xabcdef, "0.1.0", &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("# fingerprint=0000000000abcdef"));
        assert!(text.contains("# timestamp=unix:"));
        assert!(csv_data_section(&text).contains(BER_CSV_COLUMNS));
        assert!(!csv_data_section(&text).contains("timestamp"));
    }

    #[test]
    fn spectrum_csv_layout() {
        let path = tmp("spectrum.csv");
        write_spectrum_csv(
            &path,
            &[0.0, 1.0e9],
            &[
                ("psd_modified_gs".into(), vec![1e-3, 2e-3]),
                ("psd_pre_bl_edc".into(), vec![3e-3, 4e-3]),
            ],
            &[("high_band_fraction".into(), vec![0.25, 0.5])],
            7,
            "0.1.0",
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("freq_hz,psd_modified_gs,psd_pre_bl_edc"));
        assert!(text.lines().last().unwrap().starts_with("high_band_fraction,"));
        // Mismatched column length is rejected.
        assert!(write_spectrum_csv(
            &path,
            &[0.0],
            &[("x".into(), vec![1.0, 2.0])],
            &[],
            7,
            "0.1.0"
        )
        .is_err());
    }
}
