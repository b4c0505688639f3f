//! Built-in scenario configs: the bin-17 injection replication, short and
//! full-length null runs, and an example that sets every field.

use std::path::PathBuf;

use pulsepair_core::stats::NullMode;
use pulsepair_core::timebase::SIDEREAL_DAY_DAYS;
use pulsepair_core::{DtGrid, MatchMode, PolChannel, RaBinning, RfiRules, SiteGeometry};

use crate::config::{
    BaselineMode, DetectConfig, InputSpec, NullConfig, PairingConfig, PipelineConfig, QuantConfig, ReportConfig,
    Scenario, ScenarioPair, ScenarioRfi, Segment, SegmentStart,
};

pub const NAMES: [&str; 3] = ["fig1_replication", "null_short", "example_full"];

pub const FIG1_FIRST_MJD: f64 = 59580.0;
pub const FIG1_SEGMENTS: usize = 38;
/// Segments whose transit window is centred on RA 5.25 h (bin 17).
pub const FIG1_BIN17_SEGMENTS: [usize; 8] = [2, 7, 11, 16, 20, 25, 29, 34];
pub const FIG1_MULTIPLES: [u32; 8] = [3, 4, 5, 3, 4, 5, 3, 4];
pub const FIG1_DT_S: f64 = -6.25;
pub const FIG1_SNR: f64 = 15.0;
/// LHCP pulse offset into each 120 s segment.
pub const FIG1_OFFSET_S: f64 = 63.0;
const FIG1_DURATION_S: f64 = 120.0;
const Q29_BASE_HZ: f64 = 29.288;
const DF_HZ: f64 = 3.725;

pub fn by_name(name: &str) -> Option<PipelineConfig> {
    match name {
        "fig1_replication" => Some(fig1_replication()),
        "null_short" => Some(null_short()),
        "example_full" => Some(example_full()),
        _ => None,
    }
}

fn base_config(input: InputSpec, output: &str) -> PipelineConfig {
    PipelineConfig {
        input,
        site: SiteGeometry::default(),
        binning: RaBinning::default(),
        grid: DtGrid::default(),
        detect: DetectConfig::default(),
        pairing: PairingConfig::default(),
        quant: QuantConfig::Q58,
        rfi: RfiRules::default(),
        null_model: NullConfig::default(),
        report: ReportConfig::default(),
        output_dir: PathBuf::from(output),
        seed: 0,
        workers: None,
    }
}

/// Channel-centred LHCP offset so the pair straddles the middle of a
/// 128-channel band.
fn centred_offset(df_hz: f64) -> f64 {
    ((238.0 - df_hz / 2.0) / DF_HZ).round() * DF_HZ
}

/// One injected pair per segment, as a signed multiple of the Q29 base.
fn fig1_pair(multiple: u32, negative: bool) -> ScenarioPair {
    let df = multiple as f64 * Q29_BASE_HZ * if negative { -1.0 } else { 1.0 };
    ScenarioPair {
        offset_s: FIG1_OFFSET_S,
        dt_s: FIG1_DT_S,
        f_l_offset_hz: centred_offset(df),
        df_hz: df,
        snr_l: FIG1_SNR,
        snr_r: FIG1_SNR,
        width_frames: 1,
        width_chans: 1,
    }
}

/// 38 two-minute segments on consecutive days. Eight are centred on RA bin
/// 17 and carry a quantized pair at Δt = -6.25 s; the other thirty sit in
/// the remaining bins and carry one background pair each at the same Δt.
pub fn fig1_replication() -> PipelineConfig {
    let binning = RaBinning::default();
    let others: Vec<usize> = (0..binning.count).filter(|&b| b != 17).collect();
    let mut n_other = 0usize;
    let mut n_target = 0usize;
    let segments = (0..FIG1_SEGMENTS)
        .map(|i| {
            let (ra_hours, pair) = if FIG1_BIN17_SEGMENTS.contains(&i) {
                let m = FIG1_MULTIPLES[n_target];
                let p = fig1_pair(m, n_target % 2 == 1);
                n_target += 1;
                (binning.center(17), p)
            } else {
                let b = others[n_other % others.len()];
                let m = 3 + (n_other % 11) as u32;
                let p = fig1_pair(m, n_other % 2 == 0);
                n_other += 1;
                (binning.center(b), p)
            };
            Segment {
                start: SegmentStart::Transit {
                    after_mjd: FIG1_FIRST_MJD + i as f64,
                    ra_hours,
                },
                duration_s: FIG1_DURATION_S,
                pairs: vec![pair],
                rfi: Vec::new(),
            }
        })
        .collect();
    let mut cfg = base_config(
        InputSpec::Scenario(Scenario {
            n_chan: 128,
            f0_hz: 1.403e9,
            df_hz: DF_HZ,
            frame_period_s: 0.25,
            noise_mean: 1.0,
            segments,
        }),
        "fig1_replication",
    );
    cfg.seed = 1;
    cfg.detect.k_sigma = 12.0;
    cfg.quant = QuantConfig::Q29;
    cfg.report.focus_dt_s = Some(FIG1_DT_S);
    cfg
}

/// Ten minutes of noise centred on RA 3.15 h.
pub fn null_short() -> PipelineConfig {
    let mut cfg = base_config(
        InputSpec::Scenario(Scenario {
            n_chan: 64,
            f0_hz: 1.403e9,
            df_hz: DF_HZ,
            frame_period_s: 0.25,
            noise_mean: 1.0,
            segments: vec![Segment {
                start: SegmentStart::Transit {
                    after_mjd: 59580.0,
                    ra_hours: 3.15,
                },
                duration_s: 600.0,
                pairs: Vec::new(),
                rfi: Vec::new(),
            }],
        }),
        "null_short",
    );
    cfg.seed = 7;
    cfg
}

/// Wall-clock seconds for the beam to sweep `ra_hours` of right ascension.
pub fn sweep_seconds(ra_hours: f64) -> f64 {
    ra_hours * 3600.0 * SIDEREAL_DAY_DAYS
}

/// One noise-only experiment: a drift over the full 0 to 6.3 h RA range
/// plus 30 s of margin. Persistence quarantine is switched off because
/// every channel collects many noise pulses over a single day.
pub fn null_experiment(seed: u64, n_chan: u32) -> PipelineConfig {
    let binning = RaBinning::default();
    let mut cfg = base_config(
        InputSpec::Scenario(Scenario {
            n_chan,
            f0_hz: 1.403e9,
            df_hz: DF_HZ,
            frame_period_s: 0.25,
            noise_mean: 1.0,
            segments: vec![Segment {
                start: SegmentStart::Transit {
                    after_mjd: 59580.0,
                    ra_hours: (binning.start_hr + binning.end_hr()) / 2.0,
                },
                duration_s: sweep_seconds(binning.end_hr() - binning.start_hr) + 30.0,
                pairs: Vec::new(),
                rfi: Vec::new(),
            }],
        }),
        "null_experiment",
    );
    cfg.seed = seed;
    cfg.rfi.persistence_max = u32::MAX;
    cfg
}

/// Every configurable field written out, including an RFI carrier.
pub fn example_full() -> PipelineConfig {
    let pair = ScenarioPair {
        offset_s: 150.0,
        dt_s: 7.25,
        f_l_offset_hz: 100.0 * DF_HZ,
        df_hz: 2.0 * 58.575,
        snr_l: 20.0,
        snr_r: 18.0,
        width_frames: 1,
        width_chans: 1,
    };
    let rfi = ScenarioRfi {
        f_offset_hz: 40.0 * DF_HZ,
        power: 30.0,
        doppler_jitter_hz: 4.0,
        on_s: vec![(20.0, 22.0), (90.0, 91.5)],
        copolar: true,
        pol: PolChannel::Lhcp,
    };
    let mut cfg = base_config(
        InputSpec::Scenario(Scenario {
            n_chan: 128,
            f0_hz: 1.403e9,
            df_hz: DF_HZ,
            frame_period_s: 0.25,
            noise_mean: 1.0,
            segments: vec![
                Segment {
                    start: SegmentStart::Transit {
                        after_mjd: 59588.0,
                        ra_hours: 5.25,
                    },
                    duration_s: 300.0,
                    pairs: vec![pair],
                    rfi: vec![rfi],
                },
                Segment {
                    start: SegmentStart::Mjd(59589.25),
                    duration_s: 120.0,
                    pairs: Vec::new(),
                    rfi: Vec::new(),
                },
            ],
        }),
        "example_full",
    );
    cfg.site = SiteGeometry {
        longitude_deg: -79.84,
        hour_angle_offset_hr: 0.0,
        declination_deg: Some(-7.6),
    };
    cfg.detect = DetectConfig {
        window_frames: 240,
        k_sigma: 10.0,
        baseline: BaselineMode::Blockwise,
    };
    cfg.pairing = PairingConfig {
        df_abs_range_hz: (0.0, 1000.0),
        mode: MatchMode::OneToOne,
    };
    cfg.quant = QuantConfig::QX { hi_hz: 1000.0 };
    cfg.null_model = NullConfig {
        p_bin: Some(1.0 / 21.0),
        n_bins: Some(21),
        mode: NullMode::Uniform,
    };
    cfg.report = ReportConfig {
        focus_dt_s: Some(7.25),
        target_bins: vec![17],
        reference_log10: -2.0,
    };
    cfg.seed = 42;
    cfg.workers = Some(1);
    cfg
}
