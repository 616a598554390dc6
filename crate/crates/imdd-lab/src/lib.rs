//! Simulation laboratory for bandwidth-limited IM/DD OOK links with
//! iterative dispersion pre-compensation.
//!
//! The crate models a complete intensity-modulation / direct-detection
//! fiber link and the DSP around it:
//!
//! * [`signal`] — deterministic signal generation (PRBS, OOK mapping,
//!   raised-cosine shaping), transforms, and spectral estimation.
//! * [`channel`] — the physical link: electrical bandwidth limitation,
//!   ideal field modulator, fiber chromatic dispersion, square-law
//!   detection, and ROP-referenced additive noise.
//! * [`precomp`] — transmitter-side pre-distortion: the Gerchberg–Saxton
//!   family (basic and error-reversal variants) and the two-phase scheme
//!   that folds a trained bandwidth-limitation model into the GS forward
//!   operator so no receiver equalizer is needed.
//! * [`rxdsp`] — receiver chain: synchronization, downsampling, LMS
//!   feed-forward equalization, OOK decision, BER counting, receiver
//!   sensitivity extraction.
//! * [`harness`] — reproducible experiment runner: config files, BER
//!   sweeps, spectrum reports, waveform and tap-file I/O.
//!
//! All operations are deterministic functions of their explicit inputs,
//! seeds included; two runs with an identical configuration produce
//! bit-identical outputs.

// Validation guards are written `!(x > 0.0)` on purpose: the negation makes
// NaN fail the check, where the `x <= 0.0` rewrite clippy suggests would
// silently accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod harness;
pub mod precomp;
pub mod rxdsp;
pub mod signal;

pub use error::{Error, Result};
