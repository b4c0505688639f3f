use proptest::prelude::*;
use pulsepair_core::timebase::{beam_ra_hours, gmst_hours, ra_bin};
use pulsepair_core::{Instant, RaBinning, SiteGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SIDEREAL_DAY: f64 = 0.9972695663;

fn golden() -> Value {
    serde_json::from_str(include_str!("fixtures/gmst_golden.json")).unwrap()
}

fn hour_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(24.0);
    d.min(24.0 - d)
}

#[test]
fn gmst_matches_ephemeris_golden_values() {
    let g = golden();
    for point in g["points"].as_array().unwrap() {
        let mjd = point["mjd"].as_f64().unwrap();
        let want = point["gmst_hours"].as_f64().unwrap();
        let got = gmst_hours(Instant::new(mjd).unwrap());
        // 10 ms of time: the polynomial and the modern model differ by a few ms.
        assert!(hour_diff(got, want) * 3600.0 < 0.01, "mjd {mjd}: {got} vs {want}");
    }
}

#[test]
fn green_bank_transit_lands_in_bin_17() {
    let g = golden();
    let gb = &g["green_bank"];
    let mjd = gb["mjd"].as_f64().unwrap();
    let site = SiteGeometry::new(gb["longitude_deg"].as_f64().unwrap(), 0.0).unwrap();
    let ra = beam_ra_hours(Instant::new(mjd).unwrap(), &site);
    assert!((ra - 5.25).abs() < 1e-3, "{ra}");
    assert_eq!(ra_bin(ra, &RaBinning::default()), Some(17));
}

#[test]
fn beam_ra_identity_examples() {
    let mjd = 59580.0;
    let g = gmst_hours(Instant::new(mjd).unwrap());
    let t = Instant::new(mjd).unwrap();
    let greenwich = SiteGeometry::new(0.0, 0.0).unwrap();
    assert!(hour_diff(beam_ra_hours(t, &greenwich), g) < 1e-12);
    let west15 = SiteGeometry::new(-15.0, 0.0).unwrap();
    assert!(hour_diff(beam_ra_hours(t, &west15), g - 1.0) < 1e-12);
}

#[test]
fn sidereal_periodicity_over_a_year() {
    for &base in &[51544.5, 59580.0, 60123.37] {
        let g0 = gmst_hours(Instant::new(base).unwrap());
        for k in 1..=365 {
            let g = gmst_hours(Instant::new(base + k as f64 * SIDEREAL_DAY).unwrap());
            assert!(hour_diff(g, g0) * 3600.0 < 0.1, "base {base}, k {k}");
        }
    }
}

#[test]
fn gmst_range_for_a_million_mjds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1_000_000 {
        let mjd = rng.random_range(50_000.0..70_000.0);
        let g = gmst_hours(Instant::new(mjd).unwrap());
        assert!((0.0..24.0).contains(&g), "{mjd} -> {g}");
    }
}

#[test]
fn default_binning_examples() {
    let b = RaBinning::default();
    assert_eq!(ra_bin(5.25, &b), Some(17));
    assert_eq!(ra_bin(0.0, &b), Some(0));
    assert_eq!(ra_bin(6.35, &b), None);
    assert_eq!(ra_bin(5.4, &b), Some(18));
    assert_eq!(ra_bin(5.4 - 1e-12, &b), Some(17));
}

proptest! {
    #[test]
    fn bins_partition_the_window(ra in 0.0f64..6.3) {
        let b = RaBinning::default();
        let bin = ra_bin(ra, &b).expect("inside the window");
        prop_assert!(b.edge(bin) <= ra && ra < b.edge(bin + 1));
        let hits = (0..b.count).filter(|&i| b.edge(i) <= ra && ra < b.edge(i + 1)).count();
        prop_assert_eq!(hits, 1);
    }

    #[test]
    fn hour_angle_offset_shifts_ra(mjd in 50_000.0f64..70_000.0, lon in -180.0f64..180.0,
                                   ha in -11.0f64..11.0, dha in -0.9f64..0.9) {
        let t = Instant::new(mjd).unwrap();
        let a = beam_ra_hours(t, &SiteGeometry::new(lon, ha).unwrap());
        let b = beam_ra_hours(t, &SiteGeometry::new(lon, ha + dha).unwrap());
        prop_assert!(hour_diff(b, a - dha) < 1e-9);
    }
}
