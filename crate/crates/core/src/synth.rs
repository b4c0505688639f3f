//! Reproducible synthetic observations.
//!
//! A [`DualStream`] holds an AWGN floor for both polarizations plus a sparse
//! overlay of additive injections (pulse pairs, RFI carriers). Keeping the
//! injections separate from the noise floor makes removal exact.
//!
//! Every frame of noise is drawn from its own ChaCha8 substream keyed by
//! `(seed, polarization, frame)`, so output does not depend on the number of
//! worker threads or the order in which frames are generated.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::substream;
use crate::spectra::{FormatError, FrameHeader, PolChannel, Spectrogram};

const DOMAIN_AWGN: u64 = 0xA3C5;
const DOMAIN_RFI: u64 = 0x5F1E;
const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("injection outside observation extent: {0}")]
    OutOfExtent(String),
    #[error("no matching injection to remove at {0}")]
    NotInjected(String),
    #[error("invalid RFI carrier: {0}")]
    Rfi(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub header_l: FrameHeader,
    pub header_r: FrameHeader,
    pub duration_s: f64,
    pub noise_mean: f64,
}

impl SynthConfig {
    /// Both headers built from one grid; `header.pol` is overwritten.
    pub fn new(seed: u64, header: FrameHeader, duration_s: f64) -> Self {
        Self {
            seed,
            header_l: header.with_pol(PolChannel::Lhcp),
            header_r: header.with_pol(PolChannel::Rhcp),
            duration_s,
            noise_mean: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.header_l.validate()?;
        self.header_r.validate()?;
        if self.header_l.pol != PolChannel::Lhcp || self.header_r.pol != PolChannel::Rhcp {
            return Err(SynthError::Config("header polarizations must be LHCP, RHCP".into()));
        }
        if !self.header_l.same_grid(&self.header_r) {
            return Err(SynthError::Config("LHCP and RHCP headers disagree".into()));
        }
        if !(self.noise_mean.is_finite() && self.noise_mean > 0.0) {
            return Err(SynthError::Config(format!(
                "noise_mean {} must be > 0",
                self.noise_mean
            )));
        }
        if self.duration_s.is_nan() {
            return Err(SynthError::Config("duration is NaN".into()));
        }
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        if self.duration_s <= 0.0 || self.duration_s.is_infinite() {
            return 0;
        }
        (self.duration_s / self.header_l.frame_period_s + 1e-9).floor() as usize
    }

    fn header(&self, pol: PolChannel) -> FrameHeader {
        match pol {
            PolChannel::Lhcp => self.header_l,
            PolChannel::Rhcp => self.header_r,
        }
    }
}

/// An opposite-polarization pulse pair to inject.
///
/// The RHCP pulse sits at `t_l_mjd + dt_s` and `f_l_hz + df_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairInjection {
    pub t_l_mjd: f64,
    pub dt_s: f64,
    pub f_l_hz: f64,
    pub df_hz: f64,
    pub snr_l: f64,
    pub snr_r: f64,
    /// Pulse extent in frames and channels, starting at the nearest cell.
    #[serde(default = "one")]
    pub width_frames: u32,
    #[serde(default = "one")]
    pub width_chans: u32,
}

fn one() -> u32 {
    1
}

impl PairInjection {
    pub fn new(t_l_mjd: f64, dt_s: f64, f_l_hz: f64, df_hz: f64, snr_l: f64, snr_r: f64) -> Self {
        Self {
            t_l_mjd,
            dt_s,
            f_l_hz,
            df_hz,
            snr_l,
            snr_r,
            width_frames: 1,
            width_chans: 1,
        }
    }

    pub fn t_r_mjd(&self) -> f64 {
        self.t_l_mjd + self.dt_s / SECONDS_PER_DAY
    }

    pub fn f_r_hz(&self) -> f64 {
        self.f_l_hz + self.df_hz
    }
}

/// A narrowband interferer, optionally wandering in frequency frame to frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfiCarrierSpec {
    pub f_hz: f64,
    pub power: f64,
    #[serde(default)]
    pub doppler_jitter_hz: f64,
    /// Half-open `[start, end)` MJD intervals during which the carrier is on.
    pub on_intervals: Vec<(f64, f64)>,
    #[serde(default = "yes")]
    pub copolar: bool,
    /// Polarization used when `copolar` is false.
    #[serde(default = "lhcp")]
    pub pol: PolChannel,
}

fn yes() -> bool {
    true
}

fn lhcp() -> PolChannel {
    PolChannel::Lhcp
}

impl RfiCarrierSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.doppler_jitter_hz.is_finite() && self.doppler_jitter_hz >= 0.0) {
            return Err(SynthError::Rfi(format!(
                "jitter {} must be >= 0",
                self.doppler_jitter_hz
            )));
        }
        if !(self.power.is_finite() && self.power >= 0.0) {
            return Err(SynthError::Rfi(format!("power {} must be >= 0", self.power)));
        }
        let mut intervals = self.on_intervals.clone();
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (a, b) in &intervals {
            if !(a < b) {
                return Err(SynthError::Rfi(format!("empty or reversed interval [{a}, {b})")));
            }
        }
        if intervals.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(SynthError::Rfi("on_intervals overlap".into()));
        }
        Ok(())
    }

    fn is_on(&self, mjd: f64) -> bool {
        self.on_intervals.iter().any(|&(a, b)| mjd >= a && mjd < b)
    }

    fn pols(&self) -> &'static [PolChannel] {
        if self.copolar {
            &PolChannel::BOTH
        } else {
            match self.pol {
                PolChannel::Lhcp => &[PolChannel::Lhcp],
                PolChannel::Rhcp => &[PolChannel::Rhcp],
            }
        }
    }
}

type Overlay = BTreeMap<(usize, usize), Vec<f64>>;

/// Synthetic LHCP/RHCP frame streams on a shared grid.
#[derive(Debug, Clone)]
pub struct DualStream {
    base: [Spectrogram; 2],
    overlay: [Overlay; 2],
    noise_mean: f64,
}

/// Draws an AWGN floor: every cell is an independent Exponential(noise_mean)
/// power, the squared magnitude of a complex Gaussian FFT bin.
pub fn gen_awgn(config: &SynthConfig) -> Result<DualStream, SynthError> {
    config.validate()?;
    let n_frames = config.n_frames();
    let base = PolChannel::BOTH.map(|pol| {
        let header = config.header(pol);
        let mut spec = Spectrogram::zeros(header, n_frames);
        let n_chan = header.n_chan();
        spec.data
            .par_chunks_mut(n_chan)
            .enumerate()
            .for_each(|(row, cells)| {
                let mut rng = substream(config.seed, &[DOMAIN_AWGN, pol.code() as u64, row as u64]);
                for cell in cells {
                    let draw: f64 = rng.sample(Exp1);
                    *cell = (draw * config.noise_mean) as f32;
                }
            });
        spec
    });
    Ok(DualStream {
        base,
        overlay: [Overlay::new(), Overlay::new()],
        noise_mean: config.noise_mean,
    })
}

impl DualStream {
    /// Builds a stream from explicit noise floors (e.g. noise-free test data).
    pub fn from_spectrograms(
        lhcp: Spectrogram,
        rhcp: Spectrogram,
        noise_mean: f64,
    ) -> Result<Self, SynthError> {
        if !lhcp.header.same_grid(&rhcp.header) || lhcp.n_frames() != rhcp.n_frames() {
            return Err(SynthError::Config("spectrograms are not on the same grid".into()));
        }
        if lhcp.header.pol != PolChannel::Lhcp || rhcp.header.pol != PolChannel::Rhcp {
            return Err(SynthError::Config("expected (LHCP, RHCP) spectrograms".into()));
        }
        Ok(Self {
            base: [lhcp, rhcp],
            overlay: [Overlay::new(), Overlay::new()],
            noise_mean,
        })
    }

    pub fn header(&self, pol: PolChannel) -> &FrameHeader {
        &self.base[pol.index()].header
    }

    pub fn n_frames(&self) -> usize {
        self.base[0].n_frames()
    }

    pub fn noise_mean(&self) -> f64 {
        self.noise_mean
    }

    /// The noise floor alone, without injections.
    pub fn floor(&self, pol: PolChannel) -> &Spectrogram {
        &self.base[pol.index()]
    }

    /// Power of one cell including injections.
    pub fn power(&self, pol: PolChannel, row: usize, chan: usize) -> f32 {
        let base = self.base[pol.index()].get(row, chan);
        match self.overlay[pol.index()].get(&(row, chan)) {
            Some(extra) => combine(base, extra),
            None => base,
        }
    }

    /// Noise floor plus all injections, as a dense spectrogram.
    pub fn materialize(&self, pol: PolChannel) -> Spectrogram {
        let mut out = self.base[pol.index()].clone();
        let n_chan = out.n_chan();
        for (&(row, chan), extra) in &self.overlay[pol.index()] {
            let cell = &mut out.data[row * n_chan + chan];
            *cell = combine(*cell, extra);
        }
        out
    }

    pub fn write_ppf1<W: Write>(&self, pol: PolChannel, sink: W) -> Result<u64, SynthError> {
        Ok(self.materialize(pol).write(sink)?)
    }

    /// Adds `snr * noise_mean` to the cells nearest each member pulse.
    pub fn inject_pair(&mut self, inj: &PairInjection) -> Result<(), SynthError> {
        for (pol, cells, amount) in self.pair_cells(inj)? {
            if amount == 0.0 {
                continue;
            }
            for cell in cells {
                self.overlay[pol.index()].entry(cell).or_default().push(amount);
            }
        }
        Ok(())
    }

    /// Exactly undoes a previous [`inject_pair`](Self::inject_pair).
    pub fn remove_pair(&mut self, inj: &PairInjection) -> Result<(), SynthError> {
        for (pol, cells, amount) in self.pair_cells(inj)? {
            if amount == 0.0 {
                continue;
            }
            for cell in cells {
                let overlay = &mut self.overlay[pol.index()];
                let entry = overlay
                    .get_mut(&cell)
                    .ok_or_else(|| SynthError::NotInjected(format!("{pol} cell {cell:?}")))?;
                let pos = entry
                    .iter()
                    .position(|v| v.to_bits() == amount.to_bits())
                    .ok_or_else(|| SynthError::NotInjected(format!("{pol} cell {cell:?}")))?;
                entry.remove(pos);
                if entry.is_empty() {
                    overlay.remove(&cell);
                }
            }
        }
        Ok(())
    }

    /// During the carrier's on-intervals, every frame gains `power` at the
    /// channel nearest `f_hz + N(0, jitter)`. Draws falling outside the band
    /// are dropped. The jitter draw for a frame depends only on
    /// `(seed, frame)`, so copolar carriers occupy the same channel in both
    /// polarizations.
    pub fn inject_rfi(&mut self, spec: &RfiCarrierSpec, seed: u64) -> Result<(), SynthError> {
        spec.validate()?;
        if spec.on_intervals.is_empty() || spec.power == 0.0 {
            return Ok(());
        }
        let header = *self.header(PolChannel::Lhcp);
        let first = self.base[0].first_frame;
        for row in 0..self.n_frames() {
            let frame_index = first + row as u64;
            if !spec.is_on(header.frame_mjd(frame_index)) {
                continue;
            }
            let offset = if spec.doppler_jitter_hz > 0.0 {
                let mut rng = substream(seed, &[DOMAIN_RFI, frame_index]);
                let z: f64 = rng.sample(StandardNormal);
                z * spec.doppler_jitter_hz
            } else {
                0.0
            };
            let Some(chan) = header.nearest_channel(spec.f_hz + offset) else {
                continue;
            };
            for pol in spec.pols() {
                self.overlay[pol.index()]
                    .entry((row, chan))
                    .or_default()
                    .push(spec.power);
            }
        }
        Ok(())
    }

    /// Number of cells carrying at least one injection.
    pub fn injected_cells(&self, pol: PolChannel) -> usize {
        self.overlay[pol.index()].len()
    }

    /// Channels touched by injections in `pol`, with per-channel cell counts.
    pub fn injected_channels(&self, pol: PolChannel) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for &(_, chan) in self.overlay[pol.index()].keys() {
            *out.entry(chan).or_insert(0) += 1;
        }
        out
    }

    #[allow(clippy::type_complexity)]
    fn pair_cells(
        &self,
        inj: &PairInjection,
    ) -> Result<Vec<(PolChannel, Vec<(usize, usize)>, f64)>, SynthError> {
        let members = [
            (PolChannel::Lhcp, inj.t_l_mjd, inj.f_l_hz, inj.snr_l),
            (PolChannel::Rhcp, inj.t_r_mjd(), inj.f_r_hz(), inj.snr_r),
        ];
        let mut out = Vec::with_capacity(2);
        for (pol, mjd, freq, snr) in members {
            if !snr.is_finite() {
                return Err(SynthError::OutOfExtent(format!("{pol} snr {snr}")));
            }
            let (row, chan) = self.nearest_cell(pol, mjd, freq)?;
            let wf = inj.width_frames.max(1) as usize;
            let wc = inj.width_chans.max(1) as usize;
            if row + wf > self.n_frames() {
                return Err(SynthError::OutOfExtent(format!(
                    "{pol} pulse at mjd {mjd:.9} spans past the last frame"
                )));
            }
            if chan + wc > self.header(pol).n_chan() {
                return Err(SynthError::OutOfExtent(format!(
                    "{pol} pulse at {freq:.3} Hz spans past the last channel"
                )));
            }
            let cells = (row..row + wf)
                .flat_map(|r| (chan..chan + wc).map(move |c| (r, c)))
                .collect();
            out.push((pol, cells, snr * self.noise_mean));
        }
        Ok(out)
    }

    fn nearest_cell(&self, pol: PolChannel, mjd: f64, freq: f64) -> Result<(usize, usize), SynthError> {
        let header = self.header(pol);
        let first = self.base[pol.index()].first_frame as i64;
        let row = header.nearest_frame(mjd) - first;
        if !(mjd.is_finite() && row >= 0 && (row as usize) < self.n_frames()) {
            return Err(SynthError::OutOfExtent(format!("{pol} pulse time mjd {mjd:.9}")));
        }
        let chan = header
            .nearest_channel(freq)
            .ok_or_else(|| SynthError::OutOfExtent(format!("{pol} pulse frequency {freq:.3} Hz")))?;
        Ok((row as usize, chan))
    }
}

fn combine(base: f32, extra: &[f64]) -> f32 {
    (base as f64 + extra.iter().sum::<f64>()) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(n_chan: u32) -> FrameHeader {
        FrameHeader {
            f0_hz: 1.403e9,
            df_hz: 3.725,
            n_chan,
            frame_period_s: 0.25,
            pol: PolChannel::Lhcp,
            start_mjd: 59588.2,
        }
    }

    fn quiet(n_chan: u32, n_frames: usize) -> DualStream {
        let h = header(n_chan);
        DualStream::from_spectrograms(
            Spectrogram::zeros(h.with_pol(PolChannel::Lhcp), n_frames),
            Spectrogram::zeros(h.with_pol(PolChannel::Rhcp), n_frames),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_duration_gives_no_frames() {
        for d in [0.0, -5.0] {
            let s = gen_awgn(&SynthConfig::new(1, header(8), d)).unwrap();
            assert_eq!(s.n_frames(), 0);
        }
    }

    #[test]
    fn awgn_mean_is_noise_mean() {
        let cfg = SynthConfig::new(42, header(100), 2500.0); // 10^4 frames
        let s = gen_awgn(&cfg).unwrap();
        let data = &s.floor(PolChannel::Lhcp).data;
        assert_eq!(data.len(), 1_000_000);
        let mean = data.iter().map(|&x| x as f64).sum::<f64>() / data.len() as f64;
        assert!((mean - 1.0).abs() < 0.004, "mean {mean}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = SynthConfig::new(1, header(8), 10.0);
        cfg.header_r.n_chan = 9;
        assert!(gen_awgn(&cfg).is_err());
        let mut cfg = SynthConfig::new(1, header(8), 10.0);
        cfg.noise_mean = 0.0;
        assert!(gen_awgn(&cfg).is_err());
    }

    #[test]
    fn pair_injection_lands_on_nearest_cells() {
        let mut s = quiet(64, 200);
        let h = *s.header(PolChannel::Lhcp);
        let k = 120u64;
        let inj = PairInjection::new(h.frame_mjd(k), -6.25, h.f0_hz + 5.0 * h.df_hz, 117.15, 9.0, 7.0);
        s.inject_pair(&inj).unwrap();
        assert_eq!(s.power(PolChannel::Lhcp, 120, 5), 9.0);
        // 117.15 / 3.725 = 31.45 channels -> 31
        assert_eq!(s.power(PolChannel::Rhcp, 95, 36), 7.0);
        assert_eq!(s.injected_cells(PolChannel::Lhcp), 1);
        assert_eq!(s.injected_cells(PolChannel::Rhcp), 1);
    }

    #[test]
    fn zero_snr_member_leaves_stream_untouched() {
        let mut s = quiet(16, 50);
        let h = *s.header(PolChannel::Lhcp);
        let inj = PairInjection::new(h.frame_mjd(10), 1.0, h.f0_hz, 20.0, 0.0, 5.0);
        s.inject_pair(&inj).unwrap();
        assert_eq!(s.injected_cells(PolChannel::Lhcp), 0);
        assert_eq!(s.injected_cells(PolChannel::Rhcp), 1);
    }

    #[test]
    fn out_of_extent_names_coordinate() {
        let mut s = quiet(16, 50);
        let h = *s.header(PolChannel::Lhcp);
        let late = PairInjection::new(h.frame_mjd(45), 3.0, h.f0_hz, 10.0, 5.0, 5.0);
        let err = s.inject_pair(&late).unwrap_err();
        assert!(matches!(err, SynthError::OutOfExtent(ref m) if m.contains("RHCP") && m.contains("time")));
        let wide = PairInjection::new(h.frame_mjd(10), 0.0, h.f0_hz, 500.0, 5.0, 5.0);
        let err = s.inject_pair(&wide).unwrap_err();
        assert!(matches!(err, SynthError::OutOfExtent(ref m) if m.contains("frequency")));
        // nothing was applied by the failed calls
        assert_eq!(s.injected_cells(PolChannel::Lhcp), 0);
    }

    #[test]
    fn remove_restores_awgn_exactly() {
        let cfg = SynthConfig::new(9, header(32), 30.0);
        let clean = gen_awgn(&cfg).unwrap();
        let mut s = clean.clone();
        let h = *s.header(PolChannel::Lhcp);
        let a = PairInjection::new(h.frame_mjd(40), 2.5, h.f0_hz + 30.0, 40.0, 15.0, 12.3);
        let b = PairInjection::new(h.frame_mjd(40), -1.0, h.f0_hz + 30.0, 11.0, 0.7, 3.1);
        s.inject_pair(&a).unwrap();
        s.inject_pair(&b).unwrap();
        assert_ne!(s.materialize(PolChannel::Lhcp), clean.materialize(PolChannel::Lhcp));
        s.remove_pair(&a).unwrap();
        s.remove_pair(&b).unwrap();
        for pol in PolChannel::BOTH {
            assert_eq!(s.materialize(pol).data, clean.materialize(pol).data);
        }
        assert!(matches!(s.remove_pair(&a), Err(SynthError::NotInjected(_))));
    }

    #[test]
    fn pulse_width_covers_block() {
        let mut s = quiet(16, 50);
        let h = *s.header(PolChannel::Lhcp);
        let mut inj = PairInjection::new(h.frame_mjd(10), 1.0, h.f0_hz, 20.0, 4.0, 4.0);
        inj.width_frames = 2;
        inj.width_chans = 3;
        s.inject_pair(&inj).unwrap();
        assert_eq!(s.injected_cells(PolChannel::Lhcp), 6);
    }

    #[test]
    fn steady_copolar_carrier_is_a_stripe() {
        let mut s = quiet(32, 100);
        let h = *s.header(PolChannel::Lhcp);
        let spec = RfiCarrierSpec {
            f_hz: h.f0_hz + 10.0 * h.df_hz,
            power: 50.0,
            doppler_jitter_hz: 0.0,
            on_intervals: vec![(h.frame_mjd(20), h.frame_mjd(60))],
            copolar: true,
            pol: PolChannel::Lhcp,
        };
        s.inject_rfi(&spec, 3).unwrap();
        for pol in PolChannel::BOTH {
            let chans = s.injected_channels(pol);
            assert_eq!(chans.len(), 1);
            assert_eq!(chans[&10], 40);
            assert_eq!(s.power(pol, 20, 10), 50.0);
            assert_eq!(s.power(pol, 60, 10), 0.0);
        }
    }

    #[test]
    fn single_pol_carrier() {
        let mut s = quiet(8, 10);
        let h = *s.header(PolChannel::Lhcp);
        let spec = RfiCarrierSpec {
            f_hz: h.f0_hz,
            power: 5.0,
            doppler_jitter_hz: 0.0,
            on_intervals: vec![(h.start_mjd, h.frame_mjd(10))],
            copolar: false,
            pol: PolChannel::Rhcp,
        };
        s.inject_rfi(&spec, 0).unwrap();
        assert_eq!(s.injected_cells(PolChannel::Lhcp), 0);
        assert_eq!(s.injected_cells(PolChannel::Rhcp), 10);
    }

    #[test]
    fn empty_intervals_change_nothing() {
        let mut s = quiet(8, 10);
        let spec = RfiCarrierSpec {
            f_hz: 1.403e9,
            power: 5.0,
            doppler_jitter_hz: 3.0,
            on_intervals: vec![],
            copolar: true,
            pol: PolChannel::Lhcp,
        };
        s.inject_rfi(&spec, 0).unwrap();
        assert_eq!(s.injected_cells(PolChannel::Lhcp), 0);
        assert_eq!(s.injected_cells(PolChannel::Rhcp), 0);
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let spec = RfiCarrierSpec {
            f_hz: 1.0,
            power: 1.0,
            doppler_jitter_hz: 0.0,
            on_intervals: vec![(1.0, 3.0), (2.0, 4.0)],
            copolar: true,
            pol: PolChannel::Lhcp,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn jittered_carrier_spreads_like_a_gaussian() {
        let n_frames = 20_000;
        let mut s = quiet(128, n_frames);
        let h = *s.header(PolChannel::Lhcp);
        let center = 64usize;
        let spec = RfiCarrierSpec {
            f_hz: h.f0_hz + center as f64 * h.df_hz,
            power: 30.0,
            doppler_jitter_hz: 20.0,
            on_intervals: vec![(h.start_mjd, h.frame_mjd(n_frames as u64))],
            copolar: true,
            pol: PolChannel::Lhcp,
        };
        s.inject_rfi(&spec, 11).unwrap();
        let chans = s.injected_channels(PolChannel::Lhcp);
        let total: usize = chans.values().sum();
        assert_eq!(total, n_frames);
        let within = |w: i64| -> f64 {
            chans
                .iter()
                .filter(|(&c, _)| (c as i64 - center as i64).abs() <= w)
                .map(|(_, &n)| n)
                .sum::<usize>() as f64
                / total as f64
        };
        // 3 sigma = 60 Hz = 16.1 channels
        let sigma_ch = 20.0 / 3.725;
        assert!(within(16) > 0.995, "{}", within(16));
        assert!(within(5) < 0.72 && within(5) > 0.62);
        let var = chans
            .iter()
            .map(|(&c, &n)| (c as f64 - center as f64).powi(2) * n as f64)
            .sum::<f64>()
            / total as f64;
        // rounding to channels adds 1/12 channel^2
        let expected = sigma_ch * sigma_ch + 1.0 / 12.0;
        assert!((var - expected).abs() / expected < 0.05, "var {var} vs {expected}");
        assert_eq!(chans, s.injected_channels(PolChannel::Rhcp));
    }
}
