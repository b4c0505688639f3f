//! |Δf| quantization lattices and RFI rejection rules for pulse pairs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::Pulse;
use crate::pairing::PulsePair;
use crate::spectra::PolChannel;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("invalid quantization lattice: {0}")]
    Spec(String),
    #[error("invalid RFI rules: {0}")]
    Rules(String),
}

/// Accepts |Δf| within `tol_hz` of a nonzero multiple of `base_hz`, inside
/// `[lo_hz, hi_hz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantSpec {
    pub base_hz: f64,
    pub tol_hz: f64,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl QuantSpec {
    /// 58.575 Hz multiples, ±10.5 Hz, 80 to 400 Hz.
    pub const Q58: QuantSpec = QuantSpec {
        base_hz: 58.575,
        tol_hz: 10.5,
        lo_hz: 80.0,
        hi_hz: 400.0,
    };

    /// 29.288 Hz multiples, ±5.5 Hz, 80 to 400 Hz.
    pub const Q29: QuantSpec = QuantSpec {
        base_hz: 29.288,
        tol_hz: 5.5,
        lo_hz: 80.0,
        hi_hz: 400.0,
    };

    /// Extended-range lattice above 400 Hz: 58.575 Hz multiples, ±3.5 Hz.
    pub fn extended(hi_hz: f64) -> QuantSpec {
        QuantSpec {
            base_hz: 58.575,
            tol_hz: 3.5,
            lo_hz: 400.0,
            hi_hz,
        }
    }

    pub fn validate(&self) -> Result<(), QuantError> {
        let finite = [self.base_hz, self.tol_hz, self.lo_hz, self.hi_hz]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.base_hz <= 0.0 || self.tol_hz <= 0.0 || self.lo_hz < 0.0 {
            return Err(QuantError::Spec(format!("{self:?} needs positive finite values")));
        }
        if self.tol_hz >= self.base_hz / 2.0 {
            return Err(QuantError::Spec(format!(
                "tolerance {} must be below half the base {}",
                self.tol_hz, self.base_hz
            )));
        }
        if self.lo_hz >= self.hi_hz {
            return Err(QuantError::Spec(format!(
                "range [{}, {}] is empty",
                self.lo_hz, self.hi_hz
            )));
        }
        Ok(())
    }

    /// Lattice multiples `k * base` lying inside `[lo, hi]`.
    pub fn multiples_in_range(&self) -> Vec<f64> {
        let k_lo = (self.lo_hz / self.base_hz).ceil().max(1.0) as u64;
        let k_hi = (self.hi_hz / self.base_hz).floor() as u64;
        (k_lo..=k_hi).map(|k| k as f64 * self.base_hz).collect()
    }
}

/// True iff `lo <= |df| <= hi` and |df| is within `tol` of `k * base` for the
/// nearest integer `k >= 1`.
pub fn quant_accept(df_hz: f64, q: &QuantSpec) -> bool {
    let x = df_hz.abs();
    if !(x >= q.lo_hz && x <= q.hi_hz) {
        return false;
    }
    let k = (x / q.base_hz).round();
    k >= 1.0 && (x - k * q.base_hz).abs() <= q.tol_hz
}

/// Fraction of `[lo, hi]` accepted by the lattice, with acceptance windows
/// clipped at the range edges.
pub fn quant_fraction(q: &QuantSpec) -> f64 {
    let k_max = ((q.hi_hz + q.tol_hz) / q.base_hz).floor() as u64;
    let accepted: f64 = (1..=k_max)
        .map(|k| {
            let c = k as f64 * q.base_hz;
            let a = (c - q.tol_hz).max(q.lo_hz);
            let b = (c + q.tol_hz).min(q.hi_hz);
            (b - a).max(0.0)
        })
        .sum();
    accepted / (q.hi_hz - q.lo_hz)
}

/// Keeps the pairs accepted by `q`; the rest are returned as rejections.
pub fn quant_filter(pairs: Vec<PulsePair>, q: &QuantSpec, label: &str) -> (Vec<PulsePair>, Vec<Rejection>) {
    let mut kept = Vec::with_capacity(pairs.len());
    let mut log = Vec::new();
    for p in pairs {
        if quant_accept(p.df_hz, q) {
            kept.push(p);
        } else {
            log.push(Rejection {
                pair_id: p.id,
                rule: RejectRule::Quant,
                detail: format!("|df| {:.3} Hz off lattice {label}", p.df_hz.abs()),
            });
        }
    }
    (kept, log)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfiRules {
    /// A (channel, MJD day) with more detections than this, counted over
    /// both polarizations, is quarantined for that day.
    pub persistence_max: u32,
    /// A pair member with a same-channel pulse in the other polarization
    /// within this many seconds marks the pair as copolar RFI.
    pub copolar_window_s: f64,
    pub df_floor_hz: f64,
}

impl Default for RfiRules {
    fn default() -> Self {
        Self {
            persistence_max: 8,
            copolar_window_s: 1.0,
            df_floor_hz: 80.0,
        }
    }
}

impl RfiRules {
    pub fn validate(&self) -> Result<(), QuantError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.copolar_window_s) || !ok(self.df_floor_hz) {
            return Err(QuantError::Rules(format!("{self:?} needs nonnegative values")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectRule {
    DfFloor,
    Persistence,
    Copolar,
    Quant,
}

impl RejectRule {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectRule::DfFloor => "df_floor",
            RejectRule::Persistence => "persistence",
            RejectRule::Copolar => "copolar",
            RejectRule::Quant => "quant",
        }
    }
}

impl fmt::Display for RejectRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RejectRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "df_floor" => RejectRule::DfFloor,
            "persistence" => RejectRule::Persistence,
            "copolar" => RejectRule::Copolar,
            "quant" => RejectRule::Quant,
            other => return Err(format!("unknown rule {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub pair_id: usize,
    pub rule: RejectRule,
    pub detail: String,
}

/// Pulse context shared by the RFI rules.
struct PulseIndex {
    per_day_channel: HashMap<(i64, usize), u32>,
    /// Sorted MJDs of pulses per (polarization, channel).
    times: BTreeMap<(PolChannel, usize), Vec<f64>>,
}

impl PulseIndex {
    fn new(pulses: &[Pulse]) -> Self {
        let mut per_day_channel = HashMap::new();
        let mut times: BTreeMap<(PolChannel, usize), Vec<f64>> = BTreeMap::new();
        for p in pulses {
            *per_day_channel.entry((p.mjd.floor() as i64, p.chan_index)).or_insert(0) += 1;
            times.entry((p.pol, p.chan_index)).or_default().push(p.mjd);
        }
        for v in times.values_mut() {
            v.sort_by(f64::total_cmp);
        }
        Self {
            per_day_channel,
            times,
        }
    }

    fn day_count(&self, p: &Pulse) -> u32 {
        self.per_day_channel
            .get(&(p.mjd.floor() as i64, p.chan_index))
            .copied()
            .unwrap_or(0)
    }

    /// Number of opposite-polarization pulses in the same channel within
    /// `window_s`, not counting `partner`.
    fn copolar_hits(&self, p: &Pulse, partner: &Pulse, window_s: f64) -> usize {
        let Some(ts) = self.times.get(&(p.pol.opposite(), p.chan_index)) else {
            return 0;
        };
        let w = window_s / SECONDS_PER_DAY;
        let lo = ts.partition_point(|&t| t < p.mjd - w);
        let hi = ts.partition_point(|&t| t <= p.mjd + w);
        let partner_inside = partner.chan_index == p.chan_index
            && partner.pol == p.pol.opposite()
            && (partner.mjd - p.mjd).abs() <= w;
        (hi - lo) - usize::from(partner_inside)
    }
}

/// Applies the RFI rules in a fixed order (Δf floor, persistence, copolar)
/// and logs the first rule each rejected pair violates.
pub fn rfi_filter(pairs: Vec<PulsePair>, all_pulses: &[Pulse], rules: &RfiRules) -> (Vec<PulsePair>, Vec<Rejection>) {
    let index = PulseIndex::new(all_pulses);
    let mut kept = Vec::with_capacity(pairs.len());
    let mut log = Vec::new();
    for p in pairs {
        match first_violation(&p, &index, rules) {
            None => kept.push(p),
            Some((rule, detail)) => log.push(Rejection {
                pair_id: p.id,
                rule,
                detail,
            }),
        }
    }
    (kept, log)
}

fn first_violation(p: &PulsePair, index: &PulseIndex, rules: &RfiRules) -> Option<(RejectRule, String)> {
    if p.df_hz.abs() < rules.df_floor_hz {
        return Some((
            RejectRule::DfFloor,
            format!("|df| {:.3} Hz below {:.3} Hz", p.df_hz.abs(), rules.df_floor_hz),
        ));
    }
    for member in [&p.l, &p.r] {
        let n = index.day_count(member);
        if n > rules.persistence_max {
            return Some((
                RejectRule::Persistence,
                format!(
                    "channel {} has {} detections on MJD {}",
                    member.chan_index,
                    n,
                    member.mjd.floor() as i64
                ),
            ));
        }
    }
    for (member, partner) in [(&p.l, &p.r), (&p.r, &p.l)] {
        let hits = index.copolar_hits(member, partner, rules.copolar_window_s);
        if hits > 0 {
            return Some((
                RejectRule::Copolar,
                format!(
                    "{} pulse in channel {} has {} {} counterpart(s) within {} s",
                    member.pol,
                    member.chan_index,
                    hits,
                    member.pol.opposite(),
                    rules.copolar_window_s
                ),
            ));
        }
    }
    None
}
