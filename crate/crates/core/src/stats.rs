//! Binomial likelihoods over (RA bin, Δt) cells and a permutation oracle.

use std::f64::consts::{LN_10, PI};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pairing::{DtGrid, PulsePair};
use crate::rng::substream;
use crate::timebase::RaBinning;

const DOMAIN_PERM: u64 = 0x7065_726d;
const PERM_CHUNK: u64 = 1 << 16;
/// Terms this many nats below the running maximum no longer move a sum.
const LSE_CUTOFF: f64 = 45.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("binomial domain error: n={n}, k={k}, p={p}")]
    Domain { n: u64, k: u64, p: f64 },
    #[error("invalid null model: {0}")]
    Null(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullMode {
    #[default]
    Uniform,
    /// Per-bin rate estimated from pair counts pooled over all Δt.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullModel {
    pub p_bin: f64,
    pub n_bins: usize,
    pub mode: NullMode,
}

impl Default for NullModel {
    fn default() -> Self {
        Self::uniform(21)
    }
}

impl NullModel {
    pub fn uniform(n_bins: usize) -> Self {
        Self {
            p_bin: 1.0 / n_bins.max(1) as f64,
            n_bins,
            mode: NullMode::Uniform,
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if self.n_bins == 0 {
            return Err(StatsError::Null("n_bins must be positive".into()));
        }
        if !(self.p_bin > 0.0 && self.p_bin <= 1.0) {
            return Err(StatsError::Null(format!("p_bin {} outside (0, 1]", self.p_bin)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodCell {
    pub ra_bin: usize,
    pub dt_s: f64,
    pub k: u64,
    pub n: u64,
    pub log10_pmf: f64,
    pub log10_tail: f64,
}

/// Cells in Δt-major order: `cells[dt_index * n_bins + ra_bin]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodMap {
    pub grid: DtGrid,
    pub n_bins: usize,
    pub cells: Vec<LikelihoodCell>,
}

impl LikelihoodMap {
    pub fn cell(&self, dt_index: usize, ra_bin: usize) -> &LikelihoodCell {
        &self.cells[dt_index * self.n_bins + ra_bin]
    }

    pub fn cell_at(&self, dt_s: f64, ra_bin: usize) -> Option<&LikelihoodCell> {
        let i = self.grid.index_of(dt_s)?;
        (ra_bin < self.n_bins).then(|| self.cell(i, ra_bin))
    }

    pub fn row(&self, dt_index: usize) -> &[LikelihoodCell] {
        &self.cells[dt_index * self.n_bins..(dt_index + 1) * self.n_bins]
    }

    /// Lowest `log10_tail` among `bins` for each Δt, as `(dt_s, value, bin)`.
    pub fn min_tail_by_dt(&self, bins: &[usize]) -> Vec<(f64, f64, usize)> {
        (0..self.grid.len())
            .filter_map(|i| {
                bins.iter()
                    .filter(|&&b| b < self.n_bins)
                    .map(|&b| self.cell(i, b))
                    .min_by(|a, b| a.log10_tail.total_cmp(&b.log10_tail))
                    .map(|c| (c.dt_s, c.log10_tail, c.ra_bin))
            })
            .collect()
    }

    pub fn cells_below(&self, threshold_log10: f64) -> impl Iterator<Item = &LikelihoodCell> {
        self.cells.iter().filter(move |c| c.log10_tail < threshold_log10)
    }
}

fn check(n: u64, k: u64, p: f64) -> Result<(), StatsError> {
    if k > n || !(p > 0.0 && p <= 1.0) {
        return Err(StatsError::Domain { n, k, p });
    }
    Ok(())
}

fn ln_factorial_small(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// ln(n!) - ((n + 1/2) ln n - n + ln sqrt(2 pi)).
fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n == 0 {
        return 0.0;
    }
    let x = n as f64;
    if n <= 15 {
        return ln_factorial_small(n) - (x + 0.5) * x.ln() + x - 0.5 * (2.0 * PI).ln();
    }
    let xx = x * x;
    if n > 500 {
        (S0 - S1 / xx) / x
    } else if n > 80 {
        (S0 - (S1 - S2 / xx) / xx) / x
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / xx) / xx) / xx) / x
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / xx) / xx) / xx) / xx) / x
    }
}

/// x ln(x / np) + np - x, evaluated without cancellation near x = np.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let vv = v * v;
        for j in 1..1000 {
            ej *= vv;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

fn ln_pmf_unchecked(n: u64, k: u64, p: f64) -> f64 {
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let q = 1.0 - p;
    if k == 0 {
        return n as f64 * (-p).ln_1p();
    }
    if k == n {
        return n as f64 * p.ln();
    }
    let (nf, kf) = (n as f64, k as f64);
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = (2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// log10 of the Binomial(n, p) point probability at k.
pub fn binom_log10_pmf(n: u64, k: u64, p: f64) -> Result<f64, StatsError> {
    check(n, k, p)?;
    Ok(ln_pmf_unchecked(n, k, p) / LN_10)
}

/// Streaming log-sum-exp.
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, term: f64) {
        if term == f64::NEG_INFINITY {
            return;
        }
        if term > self.max {
            self.scaled = self.scaled * (self.max - term).exp() + 1.0;
            self.max = term;
        } else {
            self.scaled += (term - self.max).exp();
        }
    }

    fn ln(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

/// Natural log of the sum of pmf(j) over `range`, stopping once terms past
/// the mode become negligible.
fn ln_sum_walk(n: u64, p: f64, range: impl Iterator<Item = u64>, mode: f64, upward: bool) -> f64 {
    let mut acc = LogSum::new();
    for j in range {
        let t = ln_pmf_unchecked(n, j, p);
        acc.add(t);
        let past_mode = if upward { j as f64 > mode } else { (j as f64) < mode };
        if past_mode && t < acc.max - LSE_CUTOFF {
            break;
        }
    }
    acc.ln()
}

/// log10 P[X >= k] for X ~ Binomial(n, p).
pub fn binom_log10_tail(n: u64, k: u64, p: f64) -> Result<f64, StatsError> {
    check(n, k, p)?;
    if k == 0 {
        return Ok(0.0);
    }
    let mode = (n as f64 + 1.0) * p;
    if (k as f64) > mode {
        return Ok(ln_sum_walk(n, p, k..=n, mode, true) / LN_10);
    }
    // Tail is at least about one half here; take the complement.
    let below = ln_sum_walk(n, p, (0..k).rev(), mode, false).exp();
    Ok((-below.min(1.0)).ln_1p() / LN_10)
}

/// Per-bin probabilities under `null`. The empirical mode uses counts
/// pooled over all Δt with add-one smoothing, which keeps every rate in
/// (0, 1).
pub fn bin_probabilities(pairs: &[PulsePair], null: &NullModel) -> Vec<f64> {
    match null.mode {
        NullMode::Uniform => vec![null.p_bin; null.n_bins],
        NullMode::Empirical => {
            let mut counts = vec![0u64; null.n_bins];
            for b in pairs.iter().filter_map(|p| p.ra_bin) {
                if b < null.n_bins {
                    counts[b] += 1;
                }
            }
            let total: u64 = counts.iter().sum();
            let denom = (total + null.n_bins as u64) as f64;
            counts.iter().map(|&c| (c + 1) as f64 / denom).collect()
        }
    }
}

/// Scores every (Δt, RA bin) cell. `n` is the number of binned pairs at
/// that Δt; pairs without an RA bin or off the grid are ignored.
pub fn likelihood_map(
    pairs: &[PulsePair],
    binning: &RaBinning,
    grid: &DtGrid,
    null: &NullModel,
) -> Result<LikelihoodMap, StatsError> {
    null.validate()?;
    if null.n_bins != binning.count {
        return Err(StatsError::Null(format!(
            "null model has {} bins but the RA binning has {}",
            null.n_bins, binning.count
        )));
    }
    let n_bins = binning.count;
    let n_dt = grid.len();
    let mut counts = vec![0u64; n_dt * n_bins];
    for p in pairs {
        if let (Some(b), Some(i)) = (p.ra_bin, grid.index_of(p.dt_s)) {
            if b < n_bins {
                counts[i * n_bins + b] += 1;
            }
        }
    }
    let probs = bin_probabilities(pairs, null);
    let rows: Result<Vec<Vec<LikelihoodCell>>, StatsError> = (0..n_dt)
        .into_par_iter()
        .map(|i| {
            let row = &counts[i * n_bins..(i + 1) * n_bins];
            let n: u64 = row.iter().sum();
            let dt_s = grid.value(i);
            row.iter()
                .enumerate()
                .map(|(b, &k)| {
                    Ok(LikelihoodCell {
                        ra_bin: b,
                        dt_s,
                        k,
                        n,
                        log10_pmf: binom_log10_pmf(n, k, probs[b])?,
                        log10_tail: binom_log10_tail(n, k, probs[b])?,
                    })
                })
                .collect()
        })
        .collect();
    Ok(LikelihoodMap {
        grid: *grid,
        n_bins,
        cells: rows?.into_iter().flatten().collect(),
    })
}

/// Monte Carlo estimate of P[count >= k] when each of `n` pairs lands in the
/// target bin with probability 1/`n_bins`, with the +1 correction:
/// (hits + 1) / (n_perm + 1).
pub fn permutation_tail(n: u64, k: u64, n_bins: usize, n_perm: u64, seed: u64) -> Result<f64, StatsError> {
    if n_bins == 0 || k > n {
        return Err(StatsError::Argument(format!("n={n}, k={k}, n_bins={n_bins}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let n_chunks = n_perm.div_ceil(PERM_CHUNK);
    let hits: u64 = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, &[DOMAIN_PERM, c]);
            let len = PERM_CHUNK.min(n_perm - c * PERM_CHUNK);
            let mut hits = 0u64;
            for _ in 0..len {
                let mut count = 0u64;
                for _ in 0..n {
                    // Bin 0 stands in for the target; only the count matters.
                    if rng.random_range(0..n_bins) == 0 {
                        count += 1;
                    }
                }
                if count >= k {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok((hits + 1) as f64 / (n_perm + 1) as f64)
}

/// Permutation p-value for `target_bin` at grid value `dt_s`: each binned
/// pair at that Δt is reassigned a bin uniformly among `n_bins`.
pub fn permutation_pvalue(
    pairs: &[PulsePair],
    target_bin: usize,
    dt_s: f64,
    grid: &DtGrid,
    n_bins: usize,
    n_perm: u64,
    seed: u64,
) -> Result<f64, StatsError> {
    if n_perm < 1000 {
        return Err(StatsError::Argument(format!("n_perm {n_perm} below 1000")));
    }
    let i = grid
        .index_of(dt_s)
        .ok_or_else(|| StatsError::Argument(format!("{dt_s} s is not a grid value")))?;
    let at_dt = pairs.iter().filter(|p| p.ra_bin.is_some() && grid.index_of(p.dt_s) == Some(i));
    let (mut n, mut k) = (0u64, 0u64);
    for p in at_dt {
        n += 1;
        if p.ra_bin == Some(target_bin) {
            k += 1;
        }
    }
    permutation_tail(n, k, n_bins, n_perm, seed)
}

/// Expected number of cells below `threshold_log10` when cells are treated
/// as independent.
pub fn expected_anomalies(n_cells: u64, threshold_log10: f64) -> Result<f64, StatsError> {
    if !(threshold_log10 < 0.0) {
        return Err(StatsError::Argument(format!(
            "threshold {threshold_log10} must be negative"
        )));
    }
    Ok(n_cells as f64 * 10f64.powf(threshold_log10))
}
