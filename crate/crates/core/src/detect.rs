//! Robust baselines and pulse extraction.
//!
//! Baselines use the per-channel median and scaled median absolute deviation
//! so that pulses and RFI stripes barely bias their own reference level.
//! Above-threshold cells that touch (8-connectivity) are merged into a single
//! [`Pulse`] located at the member with the highest SNR.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectra::{PolChannel, Spectrogram};

/// Scales a median absolute deviation to a Gaussian-equivalent sigma.
pub const MAD_SCALE: f64 = 1.4826;
pub const MIN_WINDOW_FRAMES: usize = 32;
pub const DEFAULT_K_SIGMA: f64 = 8.0;

const SIGMA_FLOOR_REL: f64 = 1e-6;
const SIGMA_FLOOR_ABS: f64 = 1e-12;
const ROWS_PER_TASK: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("baseline window of {window} frames needs at least {MIN_WINDOW_FRAMES}")]
    Window { window: usize },
    #[error("insufficient data: {frames} frames available, window needs {window}")]
    InsufficientData { frames: usize, window: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEstimate {
    pub mu_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
}

impl BaselineEstimate {
    /// Same location and scale in every channel.
    pub fn uniform(n_chan: usize, mu: f64, sigma: f64) -> Self {
        Self {
            mu_hat: vec![mu; n_chan],
            sigma_hat: vec![sigma; n_chan],
        }
    }

    pub fn threshold(&self, chan: usize, k_sigma: f64) -> f64 {
        self.mu_hat[chan] + k_sigma * self.sigma_hat[chan]
    }

    pub fn snr(&self, chan: usize, power: f64) -> f64 {
        (power - self.mu_hat[chan]) / self.sigma_hat[chan]
    }
}

/// Median/MAD baseline over the first `window_frames` frames.
pub fn estimate_baseline(spec: &Spectrogram, window_frames: usize) -> Result<BaselineEstimate, DetectError> {
    check_window(spec, window_frames)?;
    Ok(estimate_baseline_rows(spec, 0..window_frames))
}

pub fn estimate_baseline_rows(spec: &Spectrogram, rows: Range<usize>) -> BaselineEstimate {
    let n_chan = spec.n_chan();
    let (mu_hat, sigma_hat) = (0..n_chan)
        .into_par_iter()
        .map(|chan| {
            let mut column: Vec<f64> = rows.clone().map(|r| spec.get(r, chan) as f64).collect();
            let mu = median_in_place(&mut column);
            for v in column.iter_mut() {
                *v = (*v - mu).abs();
            }
            let mad = median_in_place(&mut column);
            let floor = (SIGMA_FLOOR_REL * mu.abs()).max(SIGMA_FLOOR_ABS);
            (mu, (MAD_SCALE * mad).max(floor))
        })
        .unzip();
    BaselineEstimate { mu_hat, sigma_hat }
}

fn check_window(spec: &Spectrogram, window: usize) -> Result<(), DetectError> {
    if window < MIN_WINDOW_FRAMES {
        return Err(DetectError::Window { window });
    }
    if spec.n_frames() < window {
        return Err(DetectError::InsufficientData {
            frames: spec.n_frames(),
            window,
        });
    }
    Ok(())
}

fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (left, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Piecewise-constant baselines: block `i` covers rows
/// `[starts[i], starts[i + 1])`.
#[derive(Debug, Clone)]
pub struct BaselineSchedule {
    starts: Vec<usize>,
    estimates: Vec<BaselineEstimate>,
}

impl BaselineSchedule {
    pub fn single(estimate: BaselineEstimate) -> Self {
        Self {
            starts: vec![0],
            estimates: vec![estimate],
        }
    }

    /// One estimate per consecutive block of `window_frames` rows; a short
    /// trailing block is folded into the one before it.
    pub fn blockwise(spec: &Spectrogram, window_frames: usize) -> Result<Self, DetectError> {
        check_window(spec, window_frames)?;
        let n = spec.n_frames();
        let n_blocks = (n / window_frames).max(1);
        let mut starts = Vec::with_capacity(n_blocks);
        let mut estimates = Vec::with_capacity(n_blocks);
        for b in 0..n_blocks {
            let start = b * window_frames;
            let end = if b + 1 == n_blocks { n } else { start + window_frames };
            starts.push(start);
            estimates.push(estimate_baseline_rows(spec, start..end));
        }
        Ok(Self { starts, estimates })
    }

    pub fn for_row(&self, row: usize) -> &BaselineEstimate {
        let idx = self.starts.partition_point(|&s| s <= row).saturating_sub(1);
        &self.estimates[idx]
    }

    pub fn blocks(&self) -> impl Iterator<Item = (usize, &BaselineEstimate)> {
        self.starts.iter().copied().zip(self.estimates.iter())
    }
}

/// A merged time-frequency excess in one polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub pol: PolChannel,
    pub mjd: f64,
    pub freq_hz: f64,
    pub snr: f64,
    pub frame_index: u64,
    pub chan_index: usize,
}

/// Detects pulses against a single baseline.
pub fn detect_pulses(spec: &Spectrogram, baseline: &BaselineEstimate, k_sigma: f64) -> Vec<Pulse> {
    detect_with_schedule(spec, &BaselineSchedule::single(baseline.clone()), k_sigma)
}

/// Detects pulses: cells with `power > mu + k_sigma * sigma`, merged over
/// 8-connected neighbourhoods. Output is sorted by `(frame_index, chan_index)`.
///
/// The threshold scan runs in parallel over row blocks; merging is serial
/// over the (sparse) above-threshold cells, so the result is independent of
/// the thread count.
pub fn detect_with_schedule(spec: &Spectrogram, schedule: &BaselineSchedule, k_sigma: f64) -> Vec<Pulse> {
    assert!(k_sigma > 0.0, "k_sigma must be positive, got {k_sigma}");
    let n_frames = spec.n_frames();
    let n_tasks = n_frames.div_ceil(ROWS_PER_TASK);
    let per_task: Vec<Vec<Cell>> = (0..n_tasks)
        .into_par_iter()
        .map(|t| {
            let rows = t * ROWS_PER_TASK..((t + 1) * ROWS_PER_TASK).min(n_frames);
            scan_rows(spec, schedule, k_sigma, rows)
        })
        .collect();
    let cells: Vec<Cell> = per_task.into_iter().flatten().collect();
    merge_cells(spec, &cells)
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    row: usize,
    chan: usize,
    snr: f64,
}

fn scan_rows(spec: &Spectrogram, schedule: &BaselineSchedule, k_sigma: f64, rows: Range<usize>) -> Vec<Cell> {
    let mut out = Vec::new();
    for row in rows {
        let b = schedule.for_row(row);
        for (chan, &p) in spec.row(row).iter().enumerate() {
            let p = p as f64;
            if p > b.threshold(chan, k_sigma) {
                out.push(Cell {
                    row,
                    chan,
                    snr: b.snr(chan, p),
                });
            }
        }
    }
    out
}

fn merge_cells(spec: &Spectrogram, cells: &[Cell]) -> Vec<Pulse> {
    let mut uf = UnionFind::new(cells.len());
    // Cells arrive sorted by (row, chan). Track the index range of the
    // previous row and the current row.
    let mut prev = 0..0;
    let mut cur_start = 0;
    for i in 0..cells.len() {
        let c = cells[i];
        if i > cur_start && cells[cur_start].row != c.row {
            prev = if cells[i - 1].row + 1 == c.row {
                cur_start..i
            } else {
                i..i
            };
            cur_start = i;
        }
        if i > cur_start && cells[i - 1].chan + 1 == c.chan {
            uf.union(i - 1, i);
        }
        let above = &cells[prev.clone()];
        let lo = above.partition_point(|a| a.chan + 1 < c.chan);
        for (j, a) in above[lo..].iter().enumerate() {
            if a.chan > c.chan + 1 {
                break;
            }
            uf.union(prev.start + lo + j, i);
        }
    }

    let mut best: Vec<Option<usize>> = vec![None; cells.len()];
    for i in 0..cells.len() {
        let root = uf.find(i);
        match best[root] {
            Some(b) if cells[b].snr >= cells[i].snr => {}
            _ => best[root] = Some(i),
        }
    }
    let header = spec.header;
    let mut reps: Vec<usize> = best.into_iter().flatten().collect();
    reps.sort_unstable();
    reps.into_iter()
        .map(|i| {
            let c = cells[i];
            let frame_index = spec.first_frame + c.row as u64;
            Pulse {
                pol: header.pol,
                mjd: header.frame_mjd(frame_index),
                freq_hz: header.f0_hz + c.chan as f64 * header.df_hz,
                snr: c.snr,
                frame_index,
                chan_index: c.chan,
            }
        })
        .collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the earlier cell as root
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}
