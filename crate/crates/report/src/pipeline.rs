//! Stage execution. Stages communicate only through files in the output
//! directory, so `run` and the individual subcommands produce the same bytes.

use std::fmt;
use std::path::{Path, PathBuf};

use pulsepair_core::detect::{detect_with_schedule, estimate_baseline, DetectError};
use pulsepair_core::pairing::{pair_pulses, split_by_pol};
use pulsepair_core::quantfilter::{quant_filter, rfi_filter, RejectRule};
use pulsepair_core::stats::likelihood_map;
use pulsepair_core::synth::gen_awgn;
use pulsepair_core::{
    derive_seed, BaselineSchedule, DualStream, LikelihoodMap, PolChannel, Pulse, PulsePair, Rejection,
    Spectrogram, SynthConfig,
};
use thiserror::Error;

use crate::config::{BaselineMode, ConfigError, DetectConfig, InputSpec, PipelineConfig, ResolvedSegment, Scenario};
use crate::csvio::{self, EventRow};
use crate::manifest::{sha256_hex, write_atomic, ArtifactSet, FileDigest, RunManifest, MANIFEST_NAME};
use crate::svg::{emit_figures, min_tail_curve, FigureContext};

pub const PULSES_CSV: &str = "pulses.csv";
pub const PAIRS_CSV: &str = "pairs.csv";
pub const EVENTS_CSV: &str = "events.csv";
pub const REJECTIONS_CSV: &str = "rejections.csv";
pub const LIKELIHOOD_CSV: &str = "likelihood.csv";
pub const FIGURE_DIR: &str = "figures";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Setup,
    Synth,
    Detect,
    Pair,
    Analyze,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Setup => "setup",
            Stage::Synth => "synth",
            Stage::Detect => "detect",
            Stage::Pair => "pair",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} stage: {message}")]
    Data { stage: Stage, message: String },
    #[error("{stage} stage: internal error: {message}")]
    Internal { stage: Stage, message: String },
}

impl PipelineError {
    fn data(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Data {
            stage,
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data { .. } => 3,
            PipelineError::Internal { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Detect,
    Pair,
    Analyze,
    Report,
    Run,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Detect => "detect",
            Command::Pair => "pair",
            Command::Analyze => "analyze",
            Command::Report => "report",
            Command::Run => "run",
        }
    }

    fn stages(self) -> &'static [Stage] {
        match self {
            Command::Synth => &[Stage::Synth],
            Command::Detect => &[Stage::Detect],
            Command::Pair => &[Stage::Pair],
            Command::Analyze => &[Stage::Analyze],
            Command::Report => &[Stage::Report],
            Command::Run => &[Stage::Synth, Stage::Detect, Stage::Pair, Stage::Analyze, Stage::Report],
        }
    }
}

pub fn segment_file(index: usize, pol: PolChannel) -> String {
    format!("data/seg{index:03}_{}.ppf1", pol.as_str().to_ascii_lowercase())
}

pub fn figure_file(name: &str) -> String {
    format!("{FIGURE_DIR}/{name}")
}

// In-memory stage functions.

/// Noise plus injections for one scenario segment. The segment seed is
/// derived from the run seed and the segment index.
pub fn synth_segment(cfg: &PipelineConfig, scenario: &Scenario, seg: &ResolvedSegment) -> Result<DualStream, PipelineError> {
    let seed = derive_seed(cfg.seed, &[seg.index as u64]);
    let synth = SynthConfig {
        seed,
        header_l: seg.header.with_pol(PolChannel::Lhcp),
        header_r: seg.header.with_pol(PolChannel::Rhcp),
        duration_s: seg.duration_s,
        noise_mean: scenario.noise_mean,
    };
    let err = |e: pulsepair_core::synth::SynthError| {
        PipelineError::Config(ConfigError::Invalid(format!("segment {}: {e}", seg.index)))
    };
    let mut stream = gen_awgn(&synth).map_err(err)?;
    for inj in &seg.pairs {
        stream.inject_pair(inj).map_err(err)?;
    }
    for (j, rfi) in seg.rfi.iter().enumerate() {
        stream
            .inject_rfi(rfi, derive_seed(seed, &[1, j as u64]))
            .map_err(err)?;
    }
    Ok(stream)
}

pub fn detect_spectrogram(spec: &Spectrogram, d: &DetectConfig) -> Result<Vec<Pulse>, DetectError> {
    let schedule = match d.baseline {
        BaselineMode::Blockwise => BaselineSchedule::blockwise(spec, d.window_frames)?,
        BaselineMode::LeadingWindow => BaselineSchedule::single(estimate_baseline(spec, d.window_frames)?),
    };
    Ok(detect_with_schedule(spec, &schedule, d.k_sigma))
}

/// Pulses of both polarizations of a stream.
pub fn detect_stream(stream: &DualStream, d: &DetectConfig) -> Result<Vec<Pulse>, DetectError> {
    let mut out = Vec::new();
    for pol in PolChannel::BOTH {
        out.extend(detect_spectrogram(&stream.materialize(pol), d)?);
    }
    Ok(out)
}

pub fn sort_pulses(pulses: &mut [Pulse]) {
    pulses.sort_by(|a, b| {
        a.mjd
            .total_cmp(&b.mjd)
            .then(a.pol.cmp(&b.pol))
            .then(a.chan_index.cmp(&b.chan_index))
            .then(a.frame_index.cmp(&b.frame_index))
    });
}

/// Pairs over all pulses at once, so pairs may straddle segment files.
pub fn pair_all(pulses: &[Pulse], cfg: &PipelineConfig) -> Vec<PulsePair> {
    let (l, r) = split_by_pol(pulses);
    pair_pulses(&l, &r, &cfg.pairing_params(), &cfg.site, &cfg.binning)
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub candidates: usize,
    pub events: Vec<PulsePair>,
    pub rejections: Vec<Rejection>,
    pub map: LikelihoodMap,
    pub filters_passed: Vec<String>,
}

impl Analysis {
    pub fn event_rows(&self) -> Vec<EventRow> {
        self.events
            .iter()
            .map(|p| EventRow::from_pair(p, &self.filters_passed))
            .collect()
    }
}

pub fn analyze_pulses(pulses: &[Pulse], cfg: &PipelineConfig) -> Result<Analysis, PipelineError> {
    let pairs = pair_all(pulses, cfg);
    let candidates = pairs.len();
    let (kept, mut rejections) = rfi_filter(pairs, pulses, &cfg.rfi);
    let (events, quant_rej) = quant_filter(kept, &cfg.quant.spec(), cfg.quant.label());
    rejections.extend(quant_rej);
    rejections.sort_by_key(|r| r.pair_id);
    let map = likelihood_map(&events, &cfg.binning, &cfg.grid, &cfg.null_model())
        .map_err(|e| PipelineError::data(Stage::Analyze, e))?;
    let filters_passed = [RejectRule::DfFloor, RejectRule::Persistence, RejectRule::Copolar]
        .iter()
        .map(|r| r.as_str().to_string())
        .chain(std::iter::once(format!("{}:{}", RejectRule::Quant.as_str(), cfg.quant.label())))
        .collect();
    Ok(Analysis {
        candidates,
        events,
        rejections,
        map,
        filters_passed,
    })
}

/// Figure context; the focus Δt defaults to the Δt with the lowest tail in
/// the target bins.
pub fn figure_context(cfg: &PipelineConfig, rows: &[csvio::LikelihoodRow]) -> FigureContext {
    let focus_dt_s = cfg.report.focus_dt_s.unwrap_or_else(|| {
        min_tail_curve(rows, &cfg.report.target_bins)
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(dt, _)| dt)
            .unwrap_or(cfg.grid.min_s)
    });
    FigureContext {
        binning: cfg.binning,
        quant: cfg.quant.spec(),
        quant_label: cfg.quant.label().to_string(),
        focus_dt_s,
        target_bins: cfg.report.target_bins.clone(),
        reference_log10: cfg.report.reference_log10,
    }
}

// File-backed execution.

struct Run<'a> {
    cfg: &'a PipelineConfig,
    artifacts: ArtifactSet,
    inputs: Vec<FileDigest>,
}

impl Run<'_> {
    fn root(&self) -> &Path {
        self.artifacts.root()
    }

    fn write(&mut self, stage: Stage, rel: &str, data: &[u8]) -> Result<(), PipelineError> {
        self.artifacts
            .write(rel, data)
            .map_err(|e| PipelineError::data(stage, format!("cannot write {}: {e}", self.root().join(rel).display())))
    }

    /// Reads a file, recording it as an input unless this command wrote it.
    fn read(&mut self, stage: Stage, path: &Path) -> Result<Vec<u8>, PipelineError> {
        let data = std::fs::read(path).map_err(|e| PipelineError::data(stage, format!("cannot read {}: {e}", path.display())))?;
        let label = match path.strip_prefix(self.root()) {
            Ok(rel) => rel.to_string_lossy().replace('\\', "/"),
            Err(_) => std::fs::canonicalize(path)
                .unwrap_or_else(|_| path.to_path_buf())
                .to_string_lossy()
                .into_owned(),
        };
        let ours = self.artifacts.digests().iter().any(|d| d.path == label);
        if !ours && !self.inputs.iter().any(|d| d.path == label) {
            self.inputs.push(FileDigest::of(label, &data));
        }
        Ok(data)
    }

    fn read_artifact(&mut self, stage: Stage, rel: &str) -> Result<Vec<u8>, PipelineError> {
        let path = self.root().join(rel);
        if !path.exists() {
            return Err(PipelineError::data(
                stage,
                format!("{} not found; run the earlier stages first", path.display()),
            ));
        }
        self.read(stage, &path)
    }

    fn segment_paths(&self) -> Result<Vec<(PathBuf, PathBuf)>, PipelineError> {
        Ok(match &self.cfg.input {
            InputSpec::Files(files) => files.iter().map(|f| (f.lhcp.clone(), f.rhcp.clone())).collect(),
            InputSpec::Scenario(s) => (0..self.cfg.resolve_segments(s)?.len())
                .map(|i| {
                    (
                        self.root().join(segment_file(i, PolChannel::Lhcp)),
                        self.root().join(segment_file(i, PolChannel::Rhcp)),
                    )
                })
                .collect(),
        })
    }

    fn synth(&mut self) -> Result<(), PipelineError> {
        let stage = Stage::Synth;
        let InputSpec::Scenario(scenario) = &self.cfg.input else {
            return Err(ConfigError::Invalid("synth needs a scenario input".into()).into());
        };
        for seg in self.cfg.resolve_segments(scenario)? {
            let stream = synth_segment(self.cfg, scenario, &seg)?;
            for pol in PolChannel::BOTH {
                let mut bytes = Vec::new();
                stream.write_ppf1(pol, &mut bytes).map_err(|e| PipelineError::Internal {
                    stage,
                    message: e.to_string(),
                })?;
                self.write(stage, &segment_file(seg.index, pol), &bytes)?;
            }
        }
        Ok(())
    }

    fn detect(&mut self) -> Result<(), PipelineError> {
        let stage = Stage::Detect;
        let mut pulses = Vec::new();
        for (lhcp, rhcp) in self.segment_paths()? {
            for (path, pol) in [(lhcp, PolChannel::Lhcp), (rhcp, PolChannel::Rhcp)] {
                let bytes = self.read(stage, &path)?;
                let spec = Spectrogram::read(&bytes[..])
                    .map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))?;
                if spec.header.pol != pol {
                    return Err(PipelineError::data(
                        stage,
                        format!("{}: expected {pol} data, header says {}", path.display(), spec.header.pol),
                    ));
                }
                let found = detect_spectrogram(&spec, &self.cfg.detect)
                    .map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))?;
                pulses.extend(found);
            }
        }
        sort_pulses(&mut pulses);
        self.write(stage, PULSES_CSV, &csvio::pulses_to_csv(&pulses))
    }

    fn load_pulses(&mut self, stage: Stage) -> Result<Vec<Pulse>, PipelineError> {
        let bytes = self.read_artifact(stage, PULSES_CSV)?;
        csvio::pulses_from_csv(&bytes).map_err(|e| PipelineError::data(stage, format!("{PULSES_CSV}: {e}")))
    }

    fn pair(&mut self) -> Result<(), PipelineError> {
        let pulses = self.load_pulses(Stage::Pair)?;
        let pairs = pair_all(&pulses, self.cfg);
        self.write(Stage::Pair, PAIRS_CSV, &csvio::pairs_to_csv(&pairs))
    }

    fn analyze(&mut self) -> Result<(), PipelineError> {
        let stage = Stage::Analyze;
        let pulses = self.load_pulses(stage)?;
        let a = analyze_pulses(&pulses, self.cfg)?;
        self.write(stage, EVENTS_CSV, &csvio::events_to_csv(&a.event_rows()))?;
        self.write(stage, REJECTIONS_CSV, &csvio::rejections_to_csv(&a.rejections))?;
        let rows = csvio::likelihood_rows(&a.map);
        self.write(stage, LIKELIHOOD_CSV, &csvio::likelihood_to_csv(&rows))
    }

    fn report(&mut self) -> Result<(), PipelineError> {
        let stage = Stage::Report;
        let events = self.read_artifact(stage, EVENTS_CSV)?;
        let events = csvio::events_from_csv(&events).map_err(|e| PipelineError::data(stage, format!("{EVENTS_CSV}: {e}")))?;
        let rows = self.read_artifact(stage, LIKELIHOOD_CSV)?;
        let rows =
            csvio::likelihood_from_csv(&rows).map_err(|e| PipelineError::data(stage, format!("{LIKELIHOOD_CSV}: {e}")))?;
        let ctx = figure_context(self.cfg, &rows);
        for (name, doc) in emit_figures(&events, &rows, &ctx) {
            self.write(stage, &figure_file(name), doc.as_bytes())?;
        }
        Ok(())
    }
}

pub fn config_digest(cfg: &PipelineConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

/// Runs `command` and writes `manifest.json`. On error every file written
/// by this command is removed.
pub fn execute(command: Command, cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| PipelineError::Internal {
        stage: Stage::Setup,
        message: e.to_string(),
    })?;
    pool.install(|| execute_in_pool(command, cfg))
}

fn execute_in_pool(command: Command, cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    let started = std::time::Instant::now();
    let root = cfg.output_path();
    let mut run = Run {
        cfg,
        artifacts: ArtifactSet::new(&root),
        inputs: Vec::new(),
    };
    for &stage in command.stages() {
        match stage {
            Stage::Synth if command == Command::Run && matches!(cfg.input, InputSpec::Files(_)) => {}
            Stage::Synth => run.synth()?,
            Stage::Detect => run.detect()?,
            Stage::Pair => run.pair()?,
            Stage::Analyze => run.analyze()?,
            Stage::Report => run.report()?,
            Stage::Setup => {}
        }
    }
    let mut artifacts = run.artifacts.digests().to_vec();
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        config_sha256: config_digest(cfg),
        inputs: run.inputs.clone(),
        artifacts,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::Internal {
        stage: Stage::Report,
        message: e.to_string(),
    })?;
    text.push('\n');
    write_atomic(&root.join(MANIFEST_NAME), text.as_bytes())
        .map_err(|e| PipelineError::data(Stage::Report, format!("cannot write manifest: {e}")))?;
    run.artifacts.commit();
    Ok(manifest)
}
