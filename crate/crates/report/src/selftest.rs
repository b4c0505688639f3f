//! Fixture checks run by `pulsepair selftest`.

use std::io::Cursor;

use pulsepair_core::quantfilter::quant_fraction;
use pulsepair_core::spectra::write_frames;
use pulsepair_core::stats::{binom_log10_pmf, binom_log10_tail};
use pulsepair_core::timebase::{beam_ra_hours, gmst_hours, ra_bin};
use pulsepair_core::{Instant, QuantSpec, RaBinning, SiteGeometry, Spectrogram};
use serde_json::Value;

use crate::oracle::{exact_log10_pmf, exact_log10_tail, grid_scan_fraction, rel_err, Ratio};

const GMST_GOLDEN: &str = include_str!("../../core/tests/fixtures/gmst_golden.json");
const PPF1_GOLDEN: &[u8] = include_bytes!("../../core/tests/fixtures/golden_small.ppf1");

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn binomial() -> CheckResult {
    let cases: [(u64, u64, Ratio, f64); 3] = [
        (38, 8, Ratio::new(1, 21), 1.0 / 21.0),
        (81, 5, Ratio::from_f64(10f64.powf(-1.9)), 10f64.powf(-1.9)),
        (200, 3, Ratio::from_f64(0.125), 0.125),
    ];
    let mut worst = 0.0f64;
    for (n, k, exact, p) in &cases {
        let pmf = binom_log10_pmf(*n, *k, *p).unwrap_or(f64::NAN);
        let tail = binom_log10_tail(*n, *k, *p).unwrap_or(f64::NAN);
        worst = worst
            .max(rel_err(pmf, exact_log10_pmf(*n, *k, exact)))
            .max(rel_err(tail, exact_log10_tail(*n, *k, exact)));
    }
    result(
        "binomial vs exact rational sums",
        worst < 1e-12,
        format!("max relative error {worst:.2e}"),
    )
}

fn quant() -> CheckResult {
    let mut detail = Vec::new();
    let mut ok = true;
    for (label, q) in [("Q58", QuantSpec::Q58), ("Q29", QuantSpec::Q29)] {
        let analytic = quant_fraction(&q);
        let scanned = grid_scan_fraction(&q, 1e-3);
        ok &= (analytic - scanned).abs() < 1e-4;
        detail.push(format!("{label} {analytic:.5} (scan {scanned:.5})"));
    }
    result("quantization fractions vs grid scan", ok, detail.join(", "))
}

fn gmst() -> CheckResult {
    let g: Value = match serde_json::from_str(GMST_GOLDEN) {
        Ok(v) => v,
        Err(e) => return result("GMST golden values", false, e.to_string()),
    };
    let mut worst = 0.0f64;
    let points = g["points"].as_array().cloned().unwrap_or_default();
    for p in &points {
        let (Some(mjd), Some(want)) = (p["mjd"].as_f64(), p["gmst_hours"].as_f64()) else {
            return result("GMST golden values", false, "malformed fixture".into());
        };
        let got = Instant::new(mjd).map(gmst_hours).unwrap_or(f64::NAN);
        let d = (got - want).rem_euclid(24.0);
        worst = worst.max(d.min(24.0 - d) * 3600.0);
    }
    let t = Instant::new(g["green_bank"]["mjd"].as_f64().unwrap_or(f64::NAN));
    let bin = t
        .ok()
        .and_then(|t| ra_bin(beam_ra_hours(t, &SiteGeometry::green_bank()), &RaBinning::default()));
    result(
        "GMST golden values",
        !points.is_empty() && worst < 0.1 && bin == Some(17),
        format!("{} points, max error {:.4} s, Green Bank transit bin {bin:?}", points.len(), worst),
    )
}

fn ppf1() -> CheckResult {
    let outcome = Spectrogram::read(Cursor::new(PPF1_GOLDEN)).and_then(|spec| {
        let frames: Vec<_> = spec.frames().collect();
        let mut out = Vec::new();
        write_frames(&spec.header, &frames, &mut out)?;
        Ok(out)
    });
    match outcome {
        Ok(bytes) => result(
            "PPF1 golden round trip",
            bytes == PPF1_GOLDEN,
            format!("{} bytes", PPF1_GOLDEN.len()),
        ),
        Err(e) => result("PPF1 golden round trip", false, e.to_string()),
    }
}

pub fn run_all() -> Vec<CheckResult> {
    vec![binomial(), quant(), gmst(), ppf1()]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for r in super::run_all() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
