//! Opposite-polarization pulse pairing.
//!
//! Sign conventions: `dt = t(RHCP) - t(LHCP)` and `df = f(RHCP) - f(LHCP)`.
//! A pair's timestamp is that of its earlier member.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::Pulse;
use crate::spectra::PolChannel;
use crate::timebase::{beam_ra_hours, ra_bin, Instant, RaBinning, SiteGeometry};

const SECONDS_PER_DAY: f64 = 86_400.0;
/// Slack, in grid steps, for treating a raw Δt as exactly half-way between
/// two grid values.
const TIE_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairingError {
    #[error("invalid Δt grid: {0}")]
    Grid(String),
    #[error("invalid |Δf| range [{0}, {1}]")]
    DfRange(f64, f64),
}

/// Uniform Δt grid `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtGrid {
    pub min_s: f64,
    pub max_s: f64,
    pub step_s: f64,
}

impl Default for DtGrid {
    fn default() -> Self {
        Self {
            min_s: -10.0,
            max_s: 10.0,
            step_s: 0.25,
        }
    }
}

impl DtGrid {
    pub fn validate(&self) -> Result<(), PairingError> {
        if !(self.step_s.is_finite() && self.step_s > 0.0) {
            return Err(PairingError::Grid(format!("step {} must be > 0", self.step_s)));
        }
        if !(self.min_s.is_finite() && self.max_s.is_finite() && self.max_s >= self.min_s) {
            return Err(PairingError::Grid(format!(
                "need finite min <= max, got [{}, {}]",
                self.min_s, self.max_s
            )));
        }
        let steps = (self.max_s - self.min_s) / self.step_s;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(PairingError::Grid(format!(
                "(max - min) / step = {steps} is not an integer"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.max_s - self.min_s) / self.step_s).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min_s + i as f64 * self.step_s
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.value(i))
    }

    /// Grid index of a raw Δt, rounding to the nearest value with ties going
    /// toward zero. `None` beyond half a step outside the grid.
    pub fn snap(&self, dt_s: f64) -> Option<usize> {
        if !dt_s.is_finite() {
            return None;
        }
        let x = (dt_s - self.min_s) / self.step_s;
        let lo = x.floor();
        let frac = x - lo;
        let idx = if (frac - 0.5).abs() <= TIE_EPS {
            let (a, b) = (lo, lo + 1.0);
            let va = self.min_s + a * self.step_s;
            let vb = self.min_s + b * self.step_s;
            if va.abs() <= vb.abs() {
                a
            } else {
                b
            }
        } else {
            x.round()
        };
        (idx >= 0.0 && idx < self.len() as f64).then_some(idx as usize)
    }

    /// Grid index of a value that is already on the grid.
    pub fn index_of(&self, dt_s: f64) -> Option<usize> {
        let x = (dt_s - self.min_s) / self.step_s;
        let i = x.round();
        ((x - i).abs() < 1e-6 && i >= 0.0 && i < self.len() as f64).then_some(i as usize)
    }

    /// Raw Δt window accepted before snapping.
    pub fn window(&self) -> (f64, f64) {
        (self.min_s - self.step_s / 2.0, self.max_s + self.step_s / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Greedy by descending SNR metric; each pulse joins at most one pair.
    #[default]
    OneToOne,
    /// Every candidate is reported. Diagnostic only.
    AllCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairingParams {
    pub grid: DtGrid,
    /// Inclusive `[lo, hi]` on |Δf| in Hz.
    pub df_abs_range_hz: (f64, f64),
    pub mode: MatchMode,
}

impl Default for PairingParams {
    fn default() -> Self {
        Self {
            grid: DtGrid::default(),
            df_abs_range_hz: (0.0, 400.0),
            mode: MatchMode::OneToOne,
        }
    }
}

impl PairingParams {
    pub fn validate(&self) -> Result<(), PairingError> {
        self.grid.validate()?;
        let (lo, hi) = self.df_abs_range_hz;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return Err(PairingError::DfRange(lo, hi));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePair {
    /// Position in the time-sorted output of [`pair_pulses`].
    pub id: usize,
    pub l: Pulse,
    pub r: Pulse,
    /// Grid-snapped `t_r - t_l`.
    pub dt_s: f64,
    /// `f_r - f_l`.
    pub df_hz: f64,
    pub snr_metric: f64,
    pub ra_hours: f64,
    pub ra_bin: Option<usize>,
    /// MJD of the earlier member.
    pub mjd: f64,
}

impl PulsePair {
    pub fn raw_dt_s(&self) -> f64 {
        (self.r.mjd - self.l.mjd) * SECONDS_PER_DAY
    }
}

/// Pair-level ranking statistic: the weaker member's SNR.
pub fn snr_metric(l: &Pulse, r: &Pulse) -> f64 {
    l.snr.min(r.snr)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    li: usize,
    ri: usize,
    grid_idx: usize,
    raw_dt: f64,
    df: f64,
    metric: f64,
    peak: f64,
    earliest: f64,
}

/// Forms LHCP/RHCP pairs whose raw Δt lies within half a step of the grid
/// and whose |Δf| lies in `params.df_abs_range_hz`.
///
/// Output is sorted by `(mjd, dt_s, df_hz)` and ids are assigned in that
/// order.
pub fn pair_pulses(
    pulses_l: &[Pulse],
    pulses_r: &[Pulse],
    params: &PairingParams,
    site: &SiteGeometry,
    binning: &RaBinning,
) -> Vec<PulsePair> {
    if pulses_l.is_empty() || pulses_r.is_empty() {
        return Vec::new();
    }
    let mut l_sorted = pulses_l.to_vec();
    let mut r_sorted = pulses_r.to_vec();
    sort_by_time(&mut l_sorted);
    sort_by_time(&mut r_sorted);

    let mut candidates = candidates(&l_sorted, &r_sorted, params);
    let chosen: Vec<Candidate> = match params.mode {
        MatchMode::AllCandidates => candidates,
        MatchMode::OneToOne => {
            candidates.sort_by(rank_order);
            let mut used_l = vec![false; l_sorted.len()];
            let mut used_r = vec![false; r_sorted.len()];
            candidates
                .into_iter()
                .filter(|c| {
                    if used_l[c.li] || used_r[c.ri] {
                        return false;
                    }
                    used_l[c.li] = true;
                    used_r[c.ri] = true;
                    true
                })
                .collect()
        }
    };

    let mut pairs: Vec<PulsePair> = chosen
        .into_iter()
        .map(|c| {
            let l = l_sorted[c.li];
            let r = r_sorted[c.ri];
            let mjd = l.mjd.min(r.mjd);
            let ra_hours = Instant::new(mjd)
                .map(|t| beam_ra_hours(t, site))
                .unwrap_or(f64::NAN);
            PulsePair {
                id: 0,
                l,
                r,
                dt_s: params.grid.value(c.grid_idx),
                df_hz: c.df,
                snr_metric: c.metric,
                ra_hours,
                ra_bin: ra_bin(ra_hours, binning),
                mjd,
            }
        })
        .collect();
    pairs.sort_by(|a, b| {
        a.mjd
            .total_cmp(&b.mjd)
            .then(a.dt_s.total_cmp(&b.dt_s))
            .then(a.df_hz.total_cmp(&b.df_hz))
            .then(a.l.freq_hz.total_cmp(&b.l.freq_hz))
    });
    for (id, p) in pairs.iter_mut().enumerate() {
        p.id = id;
    }
    pairs
}

fn sort_by_time(p: &mut [Pulse]) {
    p.sort_by(|a, b| {
        a.mjd
            .total_cmp(&b.mjd)
            .then(a.freq_hz.total_cmp(&b.freq_hz))
            .then(b.snr.total_cmp(&a.snr))
    });
}

fn candidates(l: &[Pulse], r: &[Pulse], params: &PairingParams) -> Vec<Candidate> {
    let (w_lo, w_hi) = params.grid.window();
    let (df_lo, df_hi) = params.df_abs_range_hz;
    // one microsecond of slack for the MJD-space search; the exact test
    // below is done in seconds
    let slack = 1e-6 / SECONDS_PER_DAY;
    let per_l: Vec<Vec<Candidate>> = l
        .par_iter()
        .enumerate()
        .map(|(li, lp)| {
            let start = r.partition_point(|rp| rp.mjd < lp.mjd + w_lo / SECONDS_PER_DAY - slack);
            let mut out = Vec::new();
            for (off, rp) in r[start..].iter().enumerate() {
                if rp.mjd > lp.mjd + w_hi / SECONDS_PER_DAY + slack {
                    break;
                }
                let raw_dt = (rp.mjd - lp.mjd) * SECONDS_PER_DAY;
                if raw_dt < w_lo - 1e-6 || raw_dt > w_hi + 1e-6 {
                    continue;
                }
                let df = rp.freq_hz - lp.freq_hz;
                if df.abs() < df_lo || df.abs() > df_hi {
                    continue;
                }
                let Some(grid_idx) = params.grid.snap(raw_dt) else {
                    continue;
                };
                out.push(Candidate {
                    li,
                    ri: start + off,
                    grid_idx,
                    raw_dt,
                    df,
                    metric: snr_metric(lp, rp),
                    peak: lp.snr.max(rp.snr),
                    earliest: lp.mjd.min(rp.mjd),
                });
            }
            out
        })
        .collect();
    per_l.into_iter().flatten().collect()
}

/// Greedy ranking: highest metric first. Remaining keys are symmetric in
/// the two polarizations so that swapping L and R swaps the matching.
fn rank_order(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.metric
        .total_cmp(&a.metric)
        .then(b.peak.total_cmp(&a.peak))
        .then(a.raw_dt.abs().total_cmp(&b.raw_dt.abs()))
        .then(a.df.abs().total_cmp(&b.df.abs()))
        .then(a.earliest.total_cmp(&b.earliest))
        .then(a.li.cmp(&b.li))
        .then(a.ri.cmp(&b.ri))
}

/// Splits pulses by polarization.
pub fn split_by_pol(pulses: &[Pulse]) -> (Vec<Pulse>, Vec<Pulse>) {
    pulses.iter().partition(|p| p.pol == PolChannel::Lhcp)
}
