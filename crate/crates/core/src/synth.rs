//! Synthetic nonstationary series, sigma sweeps and shuffle surrogates.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`; normal variates use the ziggurat sampler of
//! `rand_distr::StandardNormal`. Output is bitwise reproducible within this
//! implementation for a given seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_test::LogFactorialTable;
use crate::scan::{min_p_scan, ScanConfig};
use crate::series::ReturnSeries;

/// Stream offset separating shuffle permutations from noise generation.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Mean jumps by `shift` at `change_at`.
    StepMean,
    /// Mean grows by `shift` per step after `change_at`.
    LinearTrend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthModel {
    pub kind: ModelKind,
    /// Noise scale. Zero gives the noise-free signal.
    pub sigma: f64,
    pub length: usize,
    /// First index of the new regime (0-based).
    pub change_at: usize,
    /// Step height for `StepMean`, slope for `LinearTrend`.
    pub shift: f64,
}

impl SynthModel {
    /// `sigma * xi(t)` for `t < 50`, then `+ 0.1`, over 150 points.
    pub fn step(sigma: f64) -> Self {
        Self {
            kind: ModelKind::StepMean,
            sigma,
            length: 150,
            change_at: 50,
            shift: 0.1,
        }
    }

    /// `sigma * xi(t)` for `t < 50`, then `+ 0.001 * (t - 49)`, over 150 points.
    pub fn trend(sigma: f64) -> Self {
        Self {
            kind: ModelKind::LinearTrend,
            sigma,
            length: 150,
            change_at: 50,
            shift: 0.001,
        }
    }

    pub fn of_kind(kind: ModelKind, sigma: f64) -> Self {
        match kind {
            ModelKind::StepMean => Self::step(sigma),
            ModelKind::LinearTrend => Self::trend(sigma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0 < self.change_at && self.change_at < self.length) {
            return Err(Error::InvalidConfig(format!(
                "change_at {} must lie strictly inside 0..{}",
                self.change_at, self.length
            )));
        }
        if !self.shift.is_finite() {
            return Err(Error::InvalidConfig("shift must be finite".into()));
        }
        Ok(())
    }

    /// Deterministic part of the series at index `t`.
    pub fn signal(&self, t: usize) -> f64 {
        if t < self.change_at {
            return 0.0;
        }
        match self.kind {
            ModelKind::StepMean => self.shift,
            // the first point of the new regime already carries one slope unit
            ModelKind::LinearTrend => self.shift * (t - self.change_at + 1) as f64,
        }
    }
}

/// Standard normal draws for `seed`; independent of the model so that series
/// with different sigma share the same noise path.
pub fn standard_normals(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn generate(model: &SynthModel, seed: u64) -> Result<ReturnSeries> {
    model.validate()?;
    let values = standard_normals(seed, model.length)
        .into_iter()
        .enumerate()
        .map(|(t, xi)| model.sigma * xi + model.signal(t))
        .collect();
    ReturnSeries::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub seed: u64,
    pub p_min: f64,
    pub tau_hat: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: ModelKind,
    /// Sigma-major, seed-minor.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Rows for one sigma value, in seed order.
    pub fn rows_for(&self, sigma: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.sigma == sigma)
    }
}

/// Generates, scans and records every `(sigma, seed)` cell of the grid.
///
/// `template` fixes the model shape; its sigma is replaced per cell. Each
/// cell depends only on its own seed, so the result is independent of
/// scheduling.
pub fn sigma_sweep(
    template: &SynthModel,
    sigmas: &[f64],
    seeds: &[u64],
    cfg: &ScanConfig,
) -> Result<SweepResult> {
    if sigmas.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("sigma and seed grids must be nonempty".into()));
    }
    for &sigma in sigmas {
        SynthModel { sigma, ..*template }.validate()?;
    }
    let lf = LogFactorialTable::build(template.length)?;
    let cells: Vec<(f64, u64)> = sigmas
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(sigma, seed)| {
            let series = generate(&SynthModel { sigma, ..*template }, seed)?;
            let r = min_p_scan(&series, 0..series.len(), cfg, &lf)?;
            Ok(SweepRow {
                sigma,
                seed,
                p_min: r.p_min,
                tau_hat: r.tau_hat,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind: template.kind,
        rows,
    })
}

/// Uniform random permutation of the values; labels keep their positions.
pub fn shuffle(series: &ReturnSeries, seed: u64) -> ReturnSeries {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut values = series.values().to_vec();
    values.shuffle(&mut rng);
    series.replace_values(values)
}
