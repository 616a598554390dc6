//! Reproducible experiment harness: configuration, file I/O, and the
//! simulate/sweep/spectrum/train entry points.

pub mod config;
pub mod io;
pub mod run;

pub use config::{
    ExperimentConfig, FfeConfig, McConfig, Phase1Config, SweepConfig, SweepVariable, Toggle,
};
pub use io::{
    export_taps, export_waveform, import_taps, import_waveform, WaveformFormat,
};
pub use run::{
    prepare_scheme, run_phase1, run_single, run_spectrum_report, run_sweep, PreparedScheme,
    SpectrumReport, SweepResult, TOOL_VERSION,
};
