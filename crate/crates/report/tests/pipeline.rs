use std::fs;
use std::path::Path;

use pulsepair_core::quantfilter::{RejectRule, Rejection};
use pulsepair_core::{PolChannel, Pulse, PulsePair, QuantSpec, RaBinning};
use pulsepair_report::config::{ConfigError, InputSpec, PipelineConfig};
use pulsepair_report::csvio::{
    events_from_csv, events_to_csv, likelihood_from_csv, pairs_to_csv, pulses_from_csv, pulses_to_csv,
    rejections_from_csv, rejections_to_csv, EventRow, LikelihoodRow,
};
use pulsepair_report::manifest::{verify_dir, Mismatch};
use pulsepair_report::pipeline::{execute, Command, PipelineError, Stage};
use pulsepair_report::scenarios;
use pulsepair_report::svg::{emit_figures, FigureContext, FIGURE_NAMES};

fn pulse(pol: PolChannel, mjd: f64, freq_hz: f64, snr: f64, frame_index: u64, chan_index: usize) -> Pulse {
    Pulse {
        pol,
        mjd,
        freq_hz,
        snr,
        frame_index,
        chan_index,
    }
}

fn sample_pair() -> PulsePair {
    let l = pulse(PolChannel::Lhcp, 59582.155134114, 1_403_000_193.7, 24.0021, 252, 52);
    let r = pulse(PolChannel::Rhcp, 59582.155061781, 1_403_000_283.1, 20.7104, 227, 76);
    PulsePair {
        id: 15,
        l,
        r,
        dt_s: -6.25,
        df_hz: 89.4,
        snr_metric: 20.7104,
        ra_hours: 5.2490951,
        ra_bin: Some(17),
        mjd: r.mjd,
    }
}

fn filters() -> Vec<String> {
    ["df_floor", "persistence", "copolar", "quant:Q29"].map(String::from).to_vec()
}

#[test]
fn events_csv_golden_line() {
    let row = EventRow::from_pair(&sample_pair(), &filters());
    let text = String::from_utf8(events_to_csv(&[row])).unwrap();
    assert_eq!(
        text,
        "pair_id,mjd,dt_s,f_l_hz,f_r_hz,df_hz,snr_l,snr_r,snr_metric,ra_hours,ra_bin,filters_passed\r\n\
         15,59582.155061781,-6.250,1403000193.700,1403000283.100,89.400,24.002,20.710,20.710,5.249095,17,df_floor;persistence;copolar;quant:Q29\r\n"
    );
}

#[test]
fn events_round_trip_and_sort_by_mjd() {
    let mut a = sample_pair();
    let mut b = sample_pair();
    b.id = 3;
    b.mjd -= 0.5;
    b.ra_bin = None;
    a.df_hz = -89.4;
    let rows = vec![EventRow::from_pair(&a, &filters()), EventRow::from_pair(&b, &[])];
    let bytes = events_to_csv(&rows);
    let back = events_from_csv(&bytes).unwrap();
    assert_eq!(back, vec![rows[1].clone(), rows[0].clone()]);
    assert_eq!(events_to_csv(&back), bytes);
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains(",5.249095,,\r\n"), "{text}");
}

#[test]
fn pulses_csv_golden_and_round_trip() {
    let p = sample_pair().l;
    let bytes = pulses_to_csv(&[p]);
    assert_eq!(
        String::from_utf8(bytes.clone()).unwrap(),
        "pol,mjd,freq_hz,snr,frame_index,chan_index\r\nLHCP,59582.15513411400025,1403000193.700,24.002100,252,52\r\n"
    );
    let back = pulses_from_csv(&bytes).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].pol, PolChannel::Lhcp);
    assert_eq!((back[0].frame_index, back[0].chan_index), (252, 52));
    assert!((back[0].mjd - p.mjd).abs() < 1e-12);
    assert_eq!(pulses_to_csv(&back), bytes);
}

#[test]
fn pairs_csv_golden_header() {
    let text = String::from_utf8(pairs_to_csv(&[sample_pair()])).unwrap();
    let mut lines = text.split("\r\n");
    assert_eq!(
        lines.next().unwrap(),
        "pair_id,mjd,dt_s,dt_raw_s,f_l_hz,f_r_hz,df_hz,snr_l,snr_r,snr_metric,ra_hours,ra_bin"
    );
    assert!(lines.next().unwrap().starts_with("15,59582.155061781,-6.250,-6.249"));
}

#[test]
fn rejections_quote_commas() {
    let r = vec![Rejection {
        pair_id: 4,
        rule: RejectRule::Copolar,
        detail: "LHCP chan 3, 2 hits".into(),
    }];
    let bytes = rejections_to_csv(&r);
    assert_eq!(
        String::from_utf8(bytes.clone()).unwrap(),
        "pair_id,rule,detail\r\n4,copolar,\"LHCP chan 3, 2 hits\"\r\n"
    );
    assert_eq!(rejections_from_csv(&bytes).unwrap(), r);
}

fn ctx(quant: QuantSpec) -> FigureContext {
    FigureContext {
        binning: RaBinning::default(),
        quant,
        quant_label: "Q58".into(),
        focus_dt_s: -6.25,
        target_bins: vec![17],
        reference_log10: -2.0,
    }
}

fn parse_all(figs: &[(&str, String)]) {
    for (name, doc) in figs {
        let tree = roxmltree::Document::parse(doc).unwrap_or_else(|e| panic!("{name}: {e}"));
        let root = tree.root_element();
        assert_eq!(root.tag_name().name(), "svg");
        assert!(root.descendants().any(|n| n.attribute("class") == Some("axes")), "{name}");
        assert!(root.descendants().any(|n| n.attribute("class") == Some("caption")), "{name}");
    }
}

#[test]
fn empty_input_gives_valid_figures() {
    let figs = emit_figures(&[], &[], &ctx(QuantSpec::Q58));
    assert_eq!(figs.len(), 5);
    assert_eq!(figs.iter().map(|f| f.0).collect::<Vec<_>>(), FIGURE_NAMES);
    parse_all(&figs);
    assert!(!figs[1].1.contains("<circle"));
    assert!(figs[0].1.contains(r#"data-bin="17" data-count="0""#));
}

#[test]
fn lattice_lines_at_q58_multiples() {
    let figs = emit_figures(&[], &[], &ctx(QuantSpec::Q58));
    let doc = roxmltree::Document::parse(&figs[3].1).unwrap();
    let mut lines: Vec<&str> = doc.descendants().filter_map(|n| n.attribute("data-df")).collect();
    lines.sort();
    let mut want = vec!["117.150", "175.725", "234.300", "292.875", "351.450"];
    want.extend(["-117.150", "-175.725", "-234.300", "-292.875", "-351.450"]);
    want.sort();
    assert_eq!(lines, want);
}

#[test]
fn figures_are_deterministic_and_show_data() {
    let row = EventRow::from_pair(&sample_pair(), &filters());
    let lik = vec![
        LikelihoodRow {
            dt_s: -6.25,
            ra_bin: 17,
            k: 1,
            n: 1,
            log10_pmf: -1.3,
            log10_tail: -1.3,
        },
        LikelihoodRow {
            dt_s: -6.0,
            ra_bin: 17,
            k: 0,
            n: 0,
            log10_pmf: 0.0,
            log10_tail: 0.0,
        },
    ];
    let a = emit_figures(&[row.clone()], &lik, &ctx(QuantSpec::Q29));
    let b = emit_figures(&[row], &lik, &ctx(QuantSpec::Q29));
    assert_eq!(a, b);
    parse_all(&a);
    assert!(a[0].1.contains(r#"data-bin="17" data-count="1""#));
    for fig in &a[1..4] {
        assert!(fig.1.contains(r#"data-pair="15""#));
    }
    assert!(a[4].1.contains(r#"class="reference" data-value="-2.00""#));
    assert_eq!(a[4].1.matches("<circle").count(), 2);
}

fn with_output(cfg: &mut PipelineConfig, dir: &Path) {
    cfg.output_dir = dir.to_path_buf();
}

#[test]
fn null_run_writes_verifiable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::null_short();
    with_output(&mut cfg, tmp.path());
    let m = execute(Command::Run, &cfg).unwrap();
    let paths: Vec<&str> = m.artifacts.iter().map(|a| a.path.as_str()).collect();
    for want in ["events.csv", "likelihood.csv", "pulses.csv", "pairs.csv", "rejections.csv", "figures/fig_a_counts.svg"] {
        assert!(paths.contains(&want), "{paths:?}");
    }
    let events = events_from_csv(&fs::read(tmp.path().join("events.csv")).unwrap()).unwrap();
    let rows = likelihood_from_csv(&fs::read(tmp.path().join("likelihood.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 81 * 21);
    assert!(events.len() < 200, "{}", events.len());
    let below = rows.iter().filter(|r| r.log10_tail < -2.0).count();
    assert!(below <= 10, "{below} cells below -2");
    let (_, bad) = verify_dir(tmp.path()).unwrap();
    assert!(bad.is_empty(), "{bad:?}");

    fs::write(tmp.path().join("events.csv"), b"tampered").unwrap();
    fs::remove_file(tmp.path().join("figures/fig_b_mjd.svg")).unwrap();
    let (_, bad) = verify_dir(tmp.path()).unwrap();
    assert!(bad.contains(&Mismatch::Digest("events.csv".into())));
    assert!(bad.contains(&Mismatch::Missing("figures/fig_b_mjd.svg".into())));
}

#[test]
fn stagewise_commands_match_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::null_short();
    with_output(&mut cfg, a.path());
    execute(Command::Run, &cfg).unwrap();
    with_output(&mut cfg, b.path());
    for c in [Command::Synth, Command::Detect, Command::Pair, Command::Analyze, Command::Report] {
        let m = execute(c, &cfg).unwrap();
        assert!(verify_dir(b.path()).unwrap().1.is_empty(), "{}", m.command);
    }
    let mut files = vec!["pulses.csv", "pairs.csv", "events.csv", "rejections.csv", "likelihood.csv"];
    let figs: Vec<String> = FIGURE_NAMES.iter().map(|f| format!("figures/{f}")).collect();
    files.extend(figs.iter().map(String::as_str));
    for f in files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn later_stage_without_inputs_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::null_short();
    with_output(&mut cfg, tmp.path());
    let err = execute(Command::Analyze, &cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Data { stage: Stage::Analyze, .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().starts_with("analyze stage"), "{err}");
}

#[test]
fn failing_run_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::null_short();
    with_output(&mut cfg, tmp.path());
    // too short for a 240-frame baseline window, so detection fails after synthesis
    if let InputSpec::Scenario(s) = &mut cfg.input {
        s.segments[0].duration_s = 10.0;
    }
    let err = execute(Command::Run, &cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Data { stage: Stage::Detect, .. }), "{err}");
    assert!(!tmp.path().join("data/seg000_lhcp.ppf1").exists());
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn files_input_reads_recorded_streams() {
    let src = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::null_short();
    with_output(&mut cfg, src.path());
    execute(Command::Synth, &cfg).unwrap();
    let out = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"input": {{"files": [{{"lhcp": "seg000_lhcp.ppf1", "rhcp": "seg000_rhcp.ppf1"}}]}}, "output_dir": {:?}}}"#,
        out.path().to_str().unwrap()
    );
    let cfg_path = src.path().join("data/files.json");
    fs::write(&cfg_path, text).unwrap();
    let files_cfg = PipelineConfig::load(&cfg_path).unwrap();
    let m = execute(Command::Run, &files_cfg).unwrap();
    assert_eq!(m.inputs.len(), 2);
    assert!(Path::new(&m.inputs[0].path).is_absolute());
    assert!(verify_dir(out.path()).unwrap().1.is_empty());
    execute(Command::Detect, &cfg).unwrap();
    assert_eq!(
        fs::read(src.path().join("pulses.csv")).unwrap(),
        fs::read(out.path().join("pulses.csv")).unwrap()
    );
    assert!(matches!(
        execute(Command::Synth, &files_cfg),
        Err(PipelineError::Config(ConfigError::Invalid(_)))
    ));
}

#[test]
fn output_root_env_applies_to_relative_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::null_short();
    cfg.output_dir = "rel".into();
    std::env::set_var(pulsepair_report::config::OUTPUT_ROOT_ENV, tmp.path());
    let p = cfg.output_path();
    std::env::remove_var(pulsepair_report::config::OUTPUT_ROOT_ENV);
    assert_eq!(p, tmp.path().join("rel"));
    cfg.output_dir = tmp.path().join("abs");
    assert_eq!(cfg.output_path(), tmp.path().join("abs"));
}

#[test]
fn shipped_configs_match_builders() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in scenarios::NAMES {
        let text = fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
        let want = scenarios::by_name(name).unwrap();
        assert_eq!(text, want.to_json_pretty(), "{name}.json is stale");
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), want);
    }
}
