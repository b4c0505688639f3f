//! Sidereal time, beam Right Ascension and RA binning for a fixed-pointing
//! (drift-scan) telescope.
//!
//! UT1 is taken equal to UTC. The resulting error is below one second of
//! time, far smaller than an 18 minute RA bin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length of one mean sidereal day, in mean solar days.
pub const SIDEREAL_DAY_DAYS: f64 = 0.997_269_566_3;

/// Sidereal hours elapsed per solar day.
pub const SIDEREAL_HOURS_PER_DAY: f64 = 24.065_709_824_419_08;

const MJD_J2000: f64 = 51_544.5;
const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeError {
    #[error("MJD must be finite and positive, got {0}")]
    Domain(f64),
    #[error("invalid site geometry: {0}")]
    Site(String),
    #[error("invalid RA binning: {0}")]
    Binning(String),
}

/// A UTC timestamp expressed as a Modified Julian Date.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Instant {
    mjd: f64,
}

impl Instant {
    pub fn new(mjd: f64) -> Result<Self, TimeError> {
        if mjd.is_finite() && mjd > 0.0 {
            Ok(Self { mjd })
        } else {
            Err(TimeError::Domain(mjd))
        }
    }

    pub fn mjd(self) -> f64 {
        self.mjd
    }

    /// Shifts the instant by a number of seconds.
    pub fn plus_seconds(self, seconds: f64) -> Result<Self, TimeError> {
        Self::new(self.mjd + seconds / SECONDS_PER_DAY)
    }
}

/// Fixed telescope pointing.
///
/// `declination_deg` is carried for reporting only; a single fixed beam needs
/// no declination arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteGeometry {
    /// East-positive longitude in degrees.
    pub longitude_deg: f64,
    /// Hour angle of the beam, west of the meridian, in hours.
    #[serde(default)]
    pub hour_angle_offset_hr: f64,
    #[serde(default)]
    pub declination_deg: Option<f64>,
}

impl SiteGeometry {
    pub fn new(longitude_deg: f64, hour_angle_offset_hr: f64) -> Result<Self, TimeError> {
        let site = Self {
            longitude_deg,
            hour_angle_offset_hr,
            declination_deg: None,
        };
        site.validate()?;
        Ok(site)
    }

    /// Green Bank, West Virginia, with the beam on the meridian.
    pub fn green_bank() -> Self {
        Self {
            longitude_deg: -79.84,
            hour_angle_offset_hr: 0.0,
            declination_deg: Some(-7.6),
        }
    }

    pub fn validate(&self) -> Result<(), TimeError> {
        if !(self.longitude_deg.is_finite() && (-180.0..=180.0).contains(&self.longitude_deg)) {
            return Err(TimeError::Site(format!(
                "longitude {} outside [-180, 180]",
                self.longitude_deg
            )));
        }
        if !(self.hour_angle_offset_hr.is_finite() && self.hour_angle_offset_hr.abs() < 12.0) {
            return Err(TimeError::Site(format!(
                "hour angle offset {} must satisfy |ha| < 12",
                self.hour_angle_offset_hr
            )));
        }
        Ok(())
    }
}

impl Default for SiteGeometry {
    fn default() -> Self {
        Self::green_bank()
    }
}

/// Contiguous, half-open RA bins `[start + i*width, start + (i+1)*width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaBinning {
    pub start_hr: f64,
    pub width_hr: f64,
    pub count: usize,
}

impl Default for RaBinning {
    fn default() -> Self {
        Self {
            start_hr: 0.0,
            width_hr: 0.3,
            count: 21,
        }
    }
}

impl RaBinning {
    pub fn validate(&self) -> Result<(), TimeError> {
        if !(self.width_hr.is_finite() && self.width_hr > 0.0) {
            return Err(TimeError::Binning(format!("width {} must be > 0", self.width_hr)));
        }
        if self.count == 0 {
            return Err(TimeError::Binning("count must be positive".into()));
        }
        if !(self.start_hr.is_finite() && self.start_hr >= 0.0) {
            return Err(TimeError::Binning(format!("start {} must be >= 0", self.start_hr)));
        }
        if self.end_hr() > 24.0 + 1e-9 {
            return Err(TimeError::Binning(format!(
                "bins end at {} hr, past 24 hr",
                self.end_hr()
            )));
        }
        Ok(())
    }

    /// Lower edge of bin `i` (also the upper edge of bin `i - 1`).
    pub fn edge(&self, i: usize) -> f64 {
        self.start_hr + i as f64 * self.width_hr
    }

    pub fn end_hr(&self) -> f64 {
        self.edge(self.count)
    }

    pub fn center(&self, i: usize) -> f64 {
        self.start_hr + (i as f64 + 0.5) * self.width_hr
    }

    /// Bins whose centers fall within `[lo_hr, hi_hr]`.
    pub fn bins_within(&self, lo_hr: f64, hi_hr: f64) -> Vec<usize> {
        (0..self.count)
            .filter(|&i| (lo_hr..=hi_hr).contains(&self.center(i)))
            .collect()
    }
}

/// Greenwich mean sidereal time in hours, `[0, 24)`.
///
/// IAU 1982 GMST polynomial in UT1 (taken as UTC), split into a whole-day
/// and fractional-day part to keep precision near current epochs.
pub fn gmst_hours(t: Instant) -> f64 {
    const A: f64 = 24_110.548_41 - SECONDS_PER_DAY / 2.0;
    const B: f64 = 8_640_184.812_866;
    const C: f64 = 0.093_104;
    const D: f64 = -6.2e-6;

    let mjd = t.mjd();
    let cent = (mjd - MJD_J2000) / 36_525.0;
    // The MJD epoch sits half a day after a Julian-day boundary.
    let ut_seconds = SECONDS_PER_DAY * (0.5 + mjd.rem_euclid(1.0));
    let gmst_s = A + (B + (C + D * cent) * cent) * cent + ut_seconds;
    wrap_hours(gmst_s / 3600.0)
}

/// Right Ascension currently on the beam axis, in hours `[0, 24)`.
pub fn beam_ra_hours(t: Instant, site: &SiteGeometry) -> f64 {
    wrap_hours(gmst_hours(t) + site.longitude_deg / 15.0 - site.hour_angle_offset_hr)
}

/// First instant at or after `after` when the beam points at `ra_hr`.
pub fn mjd_at_beam_ra(after: Instant, ra_hr: f64, site: &SiteGeometry) -> Instant {
    let lead_hr = wrap_hours(ra_hr - beam_ra_hours(after, site));
    let mut mjd = after.mjd() + lead_hr / SIDEREAL_HOURS_PER_DAY;
    for _ in 0..3 {
        let now = Instant { mjd };
        let err = wrap_signed(beam_ra_hours(now, site) - ra_hr);
        mjd -= err / SIDEREAL_HOURS_PER_DAY;
    }
    Instant { mjd }
}

/// RA bin containing `ra_hours`, or `None` outside the binned window.
pub fn ra_bin(ra_hours: f64, binning: &RaBinning) -> Option<usize> {
    if !ra_hours.is_finite() || ra_hours < binning.start_hr || ra_hours >= binning.end_hr() {
        return None;
    }
    let guess = ((ra_hours - binning.start_hr) / binning.width_hr).floor();
    let mut bin = (guess.max(0.0) as usize).min(binning.count - 1);
    // Division rounding can land one bin off near an edge; the edges
    // themselves are the authority.
    if ra_hours < binning.edge(bin) && bin > 0 {
        bin -= 1;
    } else if ra_hours >= binning.edge(bin + 1) && bin + 1 < binning.count {
        bin += 1;
    }
    Some(bin)
}

fn wrap_hours(h: f64) -> f64 {
    let w = h.rem_euclid(24.0);
    // rem_euclid can return exactly 24.0 for tiny negative inputs.
    if w >= 24.0 {
        0.0
    } else {
        w
    }
}

fn wrap_signed(h: f64) -> f64 {
    let w = wrap_hours(h);
    if w >= 12.0 {
        w - 24.0
    } else {
        w
    }
}
