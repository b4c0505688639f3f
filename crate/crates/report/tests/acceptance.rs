//! Acceptance suite: one `[PASS]` or `[FAIL]` line per criterion, exit
//! status 1 if any criterion fails.
//!
//! `PULSEPAIR_ACCEPTANCE_ONLY=4,9` restricts the run to the listed
//! criteria.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::Path;
use std::time::Instant as Clock;

use pulsepair_core::detect::detect_pulses;
use pulsepair_core::quantfilter::quant_fraction;
use pulsepair_core::spectra::{read_frames, write_frames};
use pulsepair_core::stats::{binom_log10_pmf, binom_log10_tail, expected_anomalies};
use pulsepair_core::synth::gen_awgn;
use pulsepair_core::timebase::{beam_ra_hours, gmst_hours, ra_bin, SIDEREAL_DAY_DAYS};
use pulsepair_core::{
    derive_seed, BaselineEstimate, FrameHeader, Instant, PolChannel, QuantSpec, RaBinning, SiteGeometry, SpectralFrame,
    SynthConfig,
};
use pulsepair_report::config::InputSpec;
use pulsepair_report::csvio::{events_from_csv, likelihood_from_csv};
use pulsepair_report::oracle::{exact_log10_pmf, grid_scan_fraction, one_sig_fig, rel_err, Ratio};
use pulsepair_report::pipeline::{analyze_pulses, detect_stream, execute, sort_pulses, synth_segment, Command};
use pulsepair_report::scenarios;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const GMST_GOLDEN: &str = include_str!("../../core/tests/fixtures/gmst_golden.json");
const PPF1_GOLDEN: &[u8] = include_bytes!("../../core/tests/fixtures/golden_small.ppf1");

struct Outcome {
    passed: bool,
    detail: String,
    info: Vec<String>,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome {
        passed,
        detail,
        info: Vec::new(),
    }
}

fn c1() -> Outcome {
    let got = binom_log10_pmf(38, 8, 1.0 / 21.0).unwrap();
    let want = exact_log10_pmf(38, 8, &Ratio::new(1, 21));
    let p = 10f64.powf(got);
    let err = rel_err(got, want);
    outcome(
        (one_sig_fig(p) - 3e-4).abs() < 1e-18 && err < 1e-12,
        format!("pmf(38, 8, 1/21) = {p:.4e}, rounds to {:.0e}; relative error vs exact sum {err:.1e}", one_sig_fig(p)),
    )
}

fn c2() -> Outcome {
    let pf = 10f64.powf(-1.9);
    let got = binom_log10_pmf(81, 5, pf).unwrap();
    let want = exact_log10_pmf(81, 5, &Ratio::from_f64(pf));
    let p = 10f64.powf(got);
    let err = rel_err(got, want);
    outcome(
        (one_sig_fig(p) - 0.003).abs() < 1e-15 && err < 1e-12,
        format!("pmf(81, 5, 10^-1.9) = {p:.4e}, rounds to {}; relative error vs exact sum {err:.1e}", one_sig_fig(p)),
    )
}

fn c3() -> Outcome {
    let e = expected_anomalies(81, -1.9).unwrap();
    let band = (expected_anomalies(81, -2.0).unwrap(), 1.02);
    outcome(
        (1.0..=1.05).contains(&e) && e >= band.0 && e <= band.1,
        format!("expected_anomalies(81, -1.9) = {e:.4}; band [{:.2}, {:.2}]", band.0, band.1),
    )
}

/// Smallest k with log10 tail below `thr`, and that tail.
fn critical_tail(n: u64, p: f64, thr: f64) -> f64 {
    (0..=n)
        .map(|k| binom_log10_tail(n, k, p).unwrap())
        .find(|&t| t < thr)
        .map(|t| 10f64.powf(t))
        .unwrap_or(0.0)
}

fn c4() -> Outcome {
    const EXPERIMENTS: u64 = 200;
    const THRESHOLD: f64 = -2.0;
    let started = Clock::now();
    let mut counts = Vec::new();
    let mut exact_expectation = 0.0;
    let mut pairs_per_dt = 0.0;
    let mut n_cells = 0usize;
    for e in 0..EXPERIMENTS {
        let cfg = scenarios::null_experiment(derive_seed(0xC4, &[e]), 128);
        let InputSpec::Scenario(s) = &cfg.input else { unreachable!() };
        let seg = &cfg.resolve_segments(s).unwrap()[0];
        let mut pulses = detect_stream(&synth_segment(&cfg, s, seg).unwrap(), &cfg.detect).unwrap();
        sort_pulses(&mut pulses);
        let a = analyze_pulses(&pulses, &cfg).unwrap();
        n_cells = a.map.cells.len();
        counts.push(a.map.cells_below(THRESHOLD).count() as f64);
        let p = cfg.null_model().p_bin;
        let bins = a.map.n_bins;
        let mut memo: BTreeMap<u64, f64> = BTreeMap::new();
        for i in 0..a.map.grid.len() {
            let n = a.map.cell(i, 0).n;
            let q = *memo.entry(n).or_insert_with(|| critical_tail(n, p, THRESHOLD));
            exact_expectation += bins as f64 * q;
            pairs_per_dt += n as f64;
        }
        if e == 0 {
            eprintln!(
                "  C4: first experiment took {:.1} s ({} pulses, {} events)",
                started.elapsed().as_secs_f64(),
                pulses.len(),
                a.events.len()
            );
        }
    }
    let m = EXPERIMENTS as f64;
    let mean = counts.iter().sum::<f64>() / m;
    let target = n_cells as f64 * 10f64.powf(THRESHOLD);
    let sigma = (n_cells as f64 * 0.01 * 0.99 / m).sqrt();
    let discrete = exact_expectation / m;
    let mut o = outcome(
        (mean - target).abs() <= 3.0 * sigma,
        format!(
            "mean cells below -2.0 = {mean:.3} over {EXPERIMENTS} experiments of {n_cells} cells; target {target:.2} ± {:.2} (3σ)",
            3.0 * sigma
        ),
    );
    let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    o.info.push(format!(
        "C4 discrete-tail expectation given the observed per-Δt pair counts: {discrete:.3} (observed {mean:.3}, sample sd of the mean {:.3}); mean pairs per Δt {:.1}; {:.0} s",
        sd / m.sqrt(),
        pairs_per_dt / (m * 81.0),
        started.elapsed().as_secs_f64()
    ));
    o
}

fn temp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("pulsepair-acceptance-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn c5(out: &Path) -> Outcome {
    let started = Clock::now();
    let mut cfg = scenarios::fig1_replication();
    cfg.output_dir = out.to_path_buf();
    cfg.workers = Some(1);
    if let Err(e) = execute(Command::Run, &cfg) {
        return outcome(false, format!("run failed: {e}"));
    }
    let events = events_from_csv(&std::fs::read(out.join("events.csv")).unwrap()).unwrap();
    let rows = likelihood_from_csv(&std::fs::read(out.join("likelihood.csv")).unwrap()).unwrap();
    let InputSpec::Scenario(s) = &cfg.input else { unreachable!() };
    let segments = cfg.resolve_segments(s).unwrap();
    let frame_days = 0.25 / 86_400.0;
    let recovered = scenarios::FIG1_BIN17_SEGMENTS
        .iter()
        .filter(|&&i| {
            let inj = &segments[i].pairs[0];
            events.iter().any(|e| {
                e.ra_bin == Some(17)
                    && e.dt_s == scenarios::FIG1_DT_S
                    && (e.mjd - inj.t_r_mjd()).abs() < frame_days
                    && (e.f_l_hz - inj.f_l_hz).abs() <= 3.725
                    && (e.df_hz - inj.df_hz).abs() <= 5.5
            })
        })
        .count();
    let cell = rows
        .iter()
        .find(|r| r.dt_s == scenarios::FIG1_DT_S && r.ra_bin == 17)
        .copied();
    let Some(cell) = cell else {
        return outcome(false, "no bin-17 cell at -6.25 s".into());
    };
    let svg = std::fs::read_to_string(out.join("figures/fig_a_counts.svg")).unwrap();
    let bar = svg.contains(&format!(r#"data-bin="17" data-count="{}""#, cell.k));
    outcome(
        recovered >= 7 && cell.log10_pmf <= -2.5 && bar,
        format!(
            "recovered {recovered}/8; bin-17 cell at -6.25 s: k = {}, n = {}, log10_pmf = {:.3} (figure bar {}); {:.1} s",
            cell.k,
            cell.n,
            cell.log10_pmf,
            if bar { "matches" } else { "MISSING" },
            started.elapsed().as_secs_f64()
        ),
    )
}

fn c6() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (label, q, target) in [("Q58", QuantSpec::Q58, 0.330), ("Q29", QuantSpec::Q29, 0.378)] {
        let analytic = quant_fraction(&q);
        let scan = grid_scan_fraction(&q, 1e-4);
        let draws = 10_000_000u64;
        let hits = (0..draws)
            .filter(|_| pulsepair_core::quantfilter::quant_accept(rng.random_range(q.lo_hz..q.hi_hz), &q))
            .count();
        let mc = hits as f64 / draws as f64;
        ok &= (analytic - target).abs() <= 0.002 && (scan - target).abs() <= 0.002 && (mc - analytic).abs() <= 0.001;
        parts.push(format!("{label} {analytic:.5} (scan {scan:.5}, MC {mc:.5})"));
    }
    outcome(ok, parts.join("; "))
}

fn c7() -> Outcome {
    let n_chan = 1000u32;
    let frames = 10_000usize;
    let header = FrameHeader {
        f0_hz: 1.403e9,
        df_hz: 3.725,
        n_chan,
        frame_period_s: 0.25,
        pol: PolChannel::Lhcp,
        start_mjd: 59580.0,
    };
    let stream = gen_awgn(&SynthConfig::new(7, header, frames as f64 * 0.25)).unwrap();
    let spec = stream.floor(PolChannel::Lhcp);
    let truth = BaselineEstimate::uniform(n_chan as usize, 1.0, 1.0);
    let hits = detect_pulses(spec, &truth, 10.0).len() as f64;
    let total = spec.data.len() as f64;
    let p = (-11.0f64).exp();
    let sd = (total * p * (1.0 - p)).sqrt();
    outcome(
        total >= 1e7 && (hits - total * p).abs() <= 3.0 * sd,
        format!("{hits} detections in {total:.0} cells; expected {:.1} ± {:.1} (3σ)", total * p, 3.0 * sd),
    )
}

fn hour_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(24.0);
    d.min(24.0 - d)
}

fn c8() -> Outcome {
    let g: Value = serde_json::from_str(GMST_GOLDEN).unwrap();
    let mut worst = 0.0f64;
    for p in g["points"].as_array().unwrap() {
        let got = gmst_hours(Instant::new(p["mjd"].as_f64().unwrap()).unwrap());
        worst = worst.max(hour_diff(got, p["gmst_hours"].as_f64().unwrap()) * 3600.0);
    }
    let mut drift = 0.0f64;
    for base in [51544.5, 59580.0, 60123.37] {
        let g0 = gmst_hours(Instant::new(base).unwrap());
        for k in 1..=365 {
            let gk = gmst_hours(Instant::new(base + k as f64 * SIDEREAL_DAY_DAYS).unwrap());
            drift = drift.max(hour_diff(gk, g0) * 3600.0);
        }
    }
    let bin = ra_bin(5.25, &RaBinning::default());
    let gb = &g["green_bank"];
    let transit = beam_ra_hours(Instant::new(gb["mjd"].as_f64().unwrap()).unwrap(), &SiteGeometry::green_bank());
    outcome(
        worst < 0.1 && drift < 0.1 && bin == Some(17) && ra_bin(transit, &RaBinning::default()) == Some(17),
        format!(
            "max golden error {worst:.4} s; max drift over 365 sidereal days {drift:.4} s; ra 5.25 -> bin {bin:?}"
        ),
    )
}

fn artifact_digests(dir: &Path) -> Vec<(String, String)> {
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["path"].as_str().unwrap().to_string(), a["sha256"].as_str().unwrap().to_string()))
        .filter(|(p, _)| p.ends_with(".csv") || p.ends_with(".svg"))
        .collect()
}

fn c9(single: &Path, multi: &Path) -> Outcome {
    let started = Clock::now();
    if !single.join("manifest.json").exists() {
        let mut cfg = scenarios::fig1_replication();
        cfg.output_dir = single.to_path_buf();
        cfg.workers = Some(1);
        if let Err(e) = execute(Command::Run, &cfg) {
            return outcome(false, format!("run failed: {e}"));
        }
    }
    let n = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(4);
    let mut cfg = scenarios::fig1_replication();
    cfg.output_dir = multi.to_path_buf();
    cfg.workers = Some(n);
    if let Err(e) = execute(Command::Run, &cfg) {
        return outcome(false, format!("run failed: {e}"));
    }
    let a = artifact_digests(single);
    let b = artifact_digests(multi);
    outcome(
        !a.is_empty() && a == b,
        format!(
            "{} CSV/SVG digests compared between 1 and {n} workers: {}; {:.1} s",
            a.len(),
            if a == b { "identical" } else { "DIFFERENT" },
            started.elapsed().as_secs_f64()
        ),
    )
}

fn c10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..24u32);
        let header = FrameHeader {
            f0_hz: rng.random_range(1e8..2e9),
            df_hz: rng.random_range(0.1..100.0),
            n_chan: n,
            frame_period_s: rng.random_range(0.01..10.0),
            pol: if rng.random() { PolChannel::Rhcp } else { PolChannel::Lhcp },
            start_mjd: rng.random_range(40_000.0..80_000.0),
        };
        let mut index = 0u64;
        let frames: Vec<SpectralFrame> = (0..rng.random_range(0..12))
            .map(|_| {
                index += rng.random_range(1..1000u64);
                SpectralFrame {
                    frame_index: index,
                    powers: (0..n).map(|_| rng.random_range(0.0f32..1e6)).collect(),
                }
            })
            .collect();
        let mut bytes = Vec::new();
        write_frames(&header, &frames, &mut bytes).unwrap();
        let reader = read_frames(Cursor::new(&bytes)).unwrap();
        let same_header = *reader.header() == header;
        let back: Vec<SpectralFrame> = reader.collect::<Result<_, _>>().unwrap();
        let mut again = Vec::new();
        write_frames(&header, &back, &mut again).unwrap();
        let same_frames = back.len() == frames.len()
            && back.iter().zip(&frames).all(|(a, b)| {
                a.frame_index == b.frame_index
                    && a.powers.iter().map(|v| v.to_bits()).eq(b.powers.iter().map(|v| v.to_bits()))
            });
        if !(same_header && same_frames && again == bytes) {
            failures += 1;
        }
    }
    let golden_header = FrameHeader {
        f0_hz: 1.403e9,
        df_hz: 3.725,
        n_chan: 4,
        frame_period_s: 0.25,
        pol: PolChannel::Rhcp,
        start_mjd: 59580.5,
    };
    let golden_frames: Vec<SpectralFrame> = [
        [1.0, 0.5, 2.25, 0.0],
        [0.125, 3.5, 1.0, 16.0],
        [0.75, 0.0625, 7.0, 1.5],
    ]
    .iter()
    .enumerate()
    .map(|(i, p)| SpectralFrame {
        frame_index: i as u64,
        powers: p.to_vec(),
    })
    .collect();
    let mut golden = Vec::new();
    write_frames(&golden_header, &golden_frames, &mut golden).unwrap();
    let golden_ok = golden == PPF1_GOLDEN;
    outcome(
        failures == 0 && golden_ok,
        format!(
            "{} of 1000 random files failed the round trip; golden bytes {}",
            failures,
            if golden_ok { "equal" } else { "DIFFER" }
        ),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("PULSEPAIR_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |i: u32| only.as_ref().is_none_or(|v| v.contains(&i));
    let single = temp_dir("single");
    let multi = temp_dir("multi");
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "binomial reproduction A", Box::new(c1)),
        (2, "binomial reproduction B", Box::new(c2)),
        (3, "expected-anomaly consistency", Box::new(c3)),
        (4, "null calibration", Box::new(c4)),
        (5, "injection recovery", Box::new(|| c5(&single))),
        (6, "quantization fractions", Box::new(c6)),
        (7, "detection false alarm", Box::new(c7)),
        (8, "sidereal correctness", Box::new(c8)),
        (9, "determinism across worker counts", Box::new(|| c9(&single, &multi))),
        (10, "PPF1 format round trip", Box::new(c10)),
    ];
    let mut failed = Vec::new();
    let mut infos = Vec::new();
    for (i, name, f) in &criteria {
        if !wanted(*i) {
            continue;
        }
        let o = f();
        println!("[{}] C{i} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        for line in &o.info {
            println!("[INFO] {line}");
        }
        infos.extend(o.info);
        if !o.passed {
            failed.push(*i);
        }
    }
    let _ = std::fs::remove_dir_all(&single);
    let _ = std::fs::remove_dir_all(&multi);
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
