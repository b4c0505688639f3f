//! Pipeline configuration: a single JSON document.

use std::path::{Path, PathBuf};

use pulsepair_core::quantfilter::QuantSpec;
use pulsepair_core::stats::NullMode;
use pulsepair_core::timebase::{mjd_at_beam_ra, Instant};
use pulsepair_core::{
    DtGrid, FrameHeader, MatchMode, NullModel, PairInjection, PairingParams, PolChannel, RaBinning,
    RfiCarrierSpec, RfiRules, SiteGeometry,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Overrides the directory that relative `output_dir` values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "PULSEPAIR_OUTPUT_ROOT";

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSpec,
    #[serde(default)]
    pub site: SiteGeometry,
    #[serde(default)]
    pub binning: RaBinning,
    #[serde(default)]
    pub grid: DtGrid,
    #[serde(default)]
    pub detect: DetectConfig,
    #[serde(default)]
    pub pairing: PairingConfig,
    #[serde(default)]
    pub quant: QuantConfig,
    #[serde(default)]
    pub rfi: RfiRules,
    #[serde(default)]
    pub null_model: NullConfig,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses every available core.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// Recorded PPF1 streams, one LHCP/RHCP pair per segment.
    Files(Vec<FilePair>),
    Scenario(Scenario),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilePair {
    pub lhcp: PathBuf,
    pub rhcp: PathBuf,
}

/// A synthetic observation: a shared channel grid and a list of segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_chan: u32,
    #[serde(default = "default_f0")]
    pub f0_hz: f64,
    #[serde(default = "default_df")]
    pub df_hz: f64,
    #[serde(default = "default_period")]
    pub frame_period_s: f64,
    #[serde(default = "default_noise_mean")]
    pub noise_mean: f64,
    pub segments: Vec<Segment>,
}

fn default_f0() -> f64 {
    1.403e9
}

fn default_df() -> f64 {
    FrameHeader::DEFAULT_DF_HZ
}

fn default_period() -> f64 {
    FrameHeader::DEFAULT_FRAME_PERIOD_S
}

fn default_noise_mean() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: SegmentStart,
    pub duration_s: f64,
    #[serde(default)]
    pub pairs: Vec<ScenarioPair>,
    #[serde(default)]
    pub rfi: Vec<ScenarioRfi>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentStart {
    Mjd(f64),
    /// Centre the segment on the first time after `after_mjd` at which the
    /// beam points at `ra_hours`.
    Transit { after_mjd: f64, ra_hours: f64 },
}

/// A pulse pair placed relative to its segment: the LHCP pulse sits
/// `offset_s` after the segment start and `f_l_offset_hz` above `f0_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioPair {
    pub offset_s: f64,
    pub dt_s: f64,
    pub f_l_offset_hz: f64,
    pub df_hz: f64,
    pub snr_l: f64,
    pub snr_r: f64,
    #[serde(default = "one")]
    pub width_frames: u32,
    #[serde(default = "one")]
    pub width_chans: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRfi {
    pub f_offset_hz: f64,
    pub power: f64,
    #[serde(default)]
    pub doppler_jitter_hz: f64,
    /// `[start, end)` in seconds from the segment start.
    pub on_s: Vec<(f64, f64)>,
    #[serde(default = "yes")]
    pub copolar: bool,
    #[serde(default = "lhcp")]
    pub pol: PolChannel,
}

fn yes() -> bool {
    true
}

fn lhcp() -> PolChannel {
    PolChannel::Lhcp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// One estimate per window-sized block of frames.
    #[default]
    Blockwise,
    /// One estimate from the leading window, applied to the whole segment.
    LeadingWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    pub window_frames: usize,
    pub k_sigma: f64,
    pub baseline: BaselineMode,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            window_frames: 240,
            k_sigma: pulsepair_core::detect::DEFAULT_K_SIGMA,
            baseline: BaselineMode::Blockwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairingConfig {
    pub df_abs_range_hz: (f64, f64),
    pub mode: MatchMode,
}

impl Default for PairingConfig {
    fn default() -> Self {
        let p = PairingParams::default();
        Self {
            df_abs_range_hz: p.df_abs_range_hz,
            mode: p.mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", deny_unknown_fields)]
pub enum QuantConfig {
    Q58,
    Q29,
    QX {
        #[serde(default = "default_qx_hi")]
        hi_hz: f64,
    },
    Custom {
        base_hz: f64,
        tol_hz: f64,
        lo_hz: f64,
        hi_hz: f64,
    },
}

fn default_qx_hi() -> f64 {
    1000.0
}

impl Default for QuantConfig {
    fn default() -> Self {
        QuantConfig::Q58
    }
}

impl QuantConfig {
    pub fn spec(&self) -> QuantSpec {
        match *self {
            QuantConfig::Q58 => QuantSpec::Q58,
            QuantConfig::Q29 => QuantSpec::Q29,
            QuantConfig::QX { hi_hz } => QuantSpec::extended(hi_hz),
            QuantConfig::Custom {
                base_hz,
                tol_hz,
                lo_hz,
                hi_hz,
            } => QuantSpec {
                base_hz,
                tol_hz,
                lo_hz,
                hi_hz,
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            QuantConfig::Q58 => "Q58",
            QuantConfig::Q29 => "Q29",
            QuantConfig::QX { .. } => "QX",
            QuantConfig::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullConfig {
    /// Defaults to `1 / n_bins`.
    pub p_bin: Option<f64>,
    /// Defaults to the RA binning's bin count.
    pub n_bins: Option<usize>,
    pub mode: NullMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Δt shown in the event-count figure; defaults to the Δt of the lowest
    /// tail probability among `target_bins`.
    pub focus_dt_s: Option<f64>,
    pub target_bins: Vec<usize>,
    pub reference_log10: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            focus_dt_s: None,
            target_bins: vec![17],
            reference_log10: -2.0,
        }
    }
}

/// A segment with its absolute start time worked out.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSegment {
    pub index: usize,
    pub header: FrameHeader,
    pub duration_s: f64,
    pub pairs: Vec<PairInjection>,
    pub rfi: Vec<RfiCarrierSpec>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative input paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let InputSpec::Files(files) = &mut cfg.input {
            for f in files {
                for p in [&mut f.lhcp, &mut f.rhcp] {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.site.validate().map_err(invalid)?;
        self.binning.validate().map_err(invalid)?;
        self.pairing_params().validate().map_err(invalid)?;
        self.quant.spec().validate().map_err(invalid)?;
        self.rfi.validate().map_err(invalid)?;
        self.null_model().validate().map_err(invalid)?;
        if self.null_model().n_bins != self.binning.count {
            return Err(invalid(format!(
                "null model has {} bins, RA binning has {}",
                self.null_model().n_bins,
                self.binning.count
            )));
        }
        if self.detect.window_frames < pulsepair_core::detect::MIN_WINDOW_FRAMES {
            return Err(invalid(format!(
                "detect.window_frames {} is below {}",
                self.detect.window_frames,
                pulsepair_core::detect::MIN_WINDOW_FRAMES
            )));
        }
        if !(self.detect.k_sigma.is_finite() && self.detect.k_sigma > 0.0) {
            return Err(invalid(format!("detect.k_sigma {} must be > 0", self.detect.k_sigma)));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be at least 1"));
        }
        if let Some(dt) = self.report.focus_dt_s {
            if self.grid.index_of(dt).is_none() {
                return Err(invalid(format!("report.focus_dt_s {dt} is not a grid value")));
            }
        }
        if let Some(&b) = self.report.target_bins.iter().find(|&&b| b >= self.binning.count) {
            return Err(invalid(format!("report.target_bins contains {b}")));
        }
        match &self.input {
            InputSpec::Files(files) if files.is_empty() => Err(invalid("input.files is empty")),
            InputSpec::Files(_) => Ok(()),
            InputSpec::Scenario(s) => {
                self.resolve_segments(s)?;
                Ok(())
            }
        }
    }

    pub fn pairing_params(&self) -> PairingParams {
        PairingParams {
            grid: self.grid,
            df_abs_range_hz: self.pairing.df_abs_range_hz,
            mode: self.pairing.mode,
        }
    }

    pub fn null_model(&self) -> NullModel {
        let n_bins = self.null_model.n_bins.unwrap_or(self.binning.count);
        NullModel {
            p_bin: self.null_model.p_bin.unwrap_or(1.0 / n_bins.max(1) as f64),
            n_bins,
            mode: self.null_model.mode,
        }
    }

    /// Output directory: absolute paths are used as given; relative ones
    /// resolve against `$PULSEPAIR_OUTPUT_ROOT` when set.
    pub fn output_path(&self) -> PathBuf {
        if self.output_dir.is_absolute() {
            return self.output_dir.clone();
        }
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Absolute segment headers and injections of a scenario.
    pub fn resolve_segments(&self, s: &Scenario) -> Result<Vec<ResolvedSegment>, ConfigError> {
        if s.segments.is_empty() {
            return Err(invalid("scenario has no segments"));
        }
        s.segments
            .iter()
            .enumerate()
            .map(|(index, seg)| {
                if !(seg.duration_s.is_finite() && seg.duration_s >= 0.0) {
                    return Err(invalid(format!("segment {index}: bad duration {}", seg.duration_s)));
                }
                let start_mjd = match seg.start {
                    SegmentStart::Mjd(m) => m,
                    SegmentStart::Transit { after_mjd, ra_hours } => {
                        let after = Instant::new(after_mjd).map_err(invalid)?;
                        if !(0.0..24.0).contains(&ra_hours) {
                            return Err(invalid(format!("segment {index}: ra_hours {ra_hours}")));
                        }
                        let t = mjd_at_beam_ra(after, ra_hours, &self.site);
                        t.mjd() - seg.duration_s / 2.0 / SECONDS_PER_DAY
                    }
                };
                let header = FrameHeader {
                    f0_hz: s.f0_hz,
                    df_hz: s.df_hz,
                    n_chan: s.n_chan,
                    frame_period_s: s.frame_period_s,
                    pol: PolChannel::Lhcp,
                    start_mjd,
                };
                header
                    .validate()
                    .map_err(|e| invalid(format!("segment {index}: {e}")))?;
                let pairs = seg
                    .pairs
                    .iter()
                    .map(|p| PairInjection {
                        t_l_mjd: start_mjd + p.offset_s / SECONDS_PER_DAY,
                        dt_s: p.dt_s,
                        f_l_hz: s.f0_hz + p.f_l_offset_hz,
                        df_hz: p.df_hz,
                        snr_l: p.snr_l,
                        snr_r: p.snr_r,
                        width_frames: p.width_frames,
                        width_chans: p.width_chans,
                    })
                    .collect();
                let rfi = seg
                    .rfi
                    .iter()
                    .map(|r| {
                        let spec = RfiCarrierSpec {
                            f_hz: s.f0_hz + r.f_offset_hz,
                            power: r.power,
                            doppler_jitter_hz: r.doppler_jitter_hz,
                            on_intervals: r
                                .on_s
                                .iter()
                                .map(|&(a, b)| {
                                    (start_mjd + a / SECONDS_PER_DAY, start_mjd + b / SECONDS_PER_DAY)
                                })
                                .collect(),
                            copolar: r.copolar,
                            pol: r.pol,
                        };
                        spec.validate()
                            .map_err(|e| invalid(format!("segment {index}: {e}")))?;
                        Ok(spec)
                    })
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                Ok(ResolvedSegment {
                    index,
                    header,
                    duration_s: seg.duration_s,
                    pairs,
                    rfi,
                })
            })
            .collect()
    }
}
