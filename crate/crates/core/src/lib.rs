//! Core signal-processing and statistics for dual circular-polarization
//! pulse-pair searches.
//!
//! The crate is organized as a pipeline of small, mostly pure stages:
//!
//! * [`timebase`] converts MJD timestamps into sidereal time, beam Right
//!   Ascension and RA bins for a fixed-pointing drift-scan telescope.
//! * [`spectra`] defines the spectrogram model and the PPF1 binary frame
//!   format.
//! * [`synth`] generates reproducible noise, RFI and pulse-pair injections.
//! * [`detect`] estimates robust per-channel baselines and extracts pulses.
//! * [`pairing`] forms opposite-polarization pulse pairs on a Δt grid.
//! * [`quantfilter`] applies |Δf| quantization lattices and RFI rules.
//! * [`stats`] scores (RA bin, Δt) cells with exact binomial likelihoods.

pub mod detect;
pub mod pairing;
pub mod quantfilter;
pub mod spectra;
pub mod stats;
pub mod synth;
pub mod timebase;

mod rng;

pub use rng::derive_seed;

pub use detect::{BaselineEstimate, BaselineSchedule, Pulse};
pub use pairing::{DtGrid, MatchMode, PairingParams, PulsePair};
pub use quantfilter::{QuantSpec, Rejection, RfiRules};
pub use spectra::{FrameHeader, PolChannel, SpectralFrame, Spectrogram};
pub use stats::{LikelihoodCell, LikelihoodMap, NullModel};
pub use synth::{DualStream, PairInjection, RfiCarrierSpec, SynthConfig};
pub use timebase::{Instant, RaBinning, SiteGeometry};
