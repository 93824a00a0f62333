//! Exhaustive search for the split time and value threshold that minimize
//! the Fisher exact p-value within a window.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_test::{ln_p_unchecked, ContingencyTable, LogFactorialTable, PValueVariant};
use crate::series::ReturnSeries;

/// Windows up to this length scan every distinct value under
/// [`ThresholdMode::Auto`]; longer windows use a quantile grid.
pub const AUTO_ALL_VALUES_MAX_LEN: usize = 500;
pub const AUTO_GRID_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// `AllUniqueValues` for short windows, `QuantileGrid(201)` otherwise.
    #[default]
    Auto,
    AllUniqueValues,
    /// Empirical (inverse-CDF) quantiles at `q` evenly spaced levels.
    QuantileGrid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Minimum number of observations on each side of a split.
    pub min_side: usize,
    pub threshold_mode: ThresholdMode,
    pub variant: PValueVariant,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            min_side: 2,
            threshold_mode: ThresholdMode::Auto,
            variant: PValueVariant::StandardTwoSided,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_side < 2 {
            return Err(Error::InvalidConfig(format!(
                "min_side must be at least 2, got {}",
                self.min_side
            )));
        }
        if let ThresholdMode::QuantileGrid(q) = self.threshold_mode {
            if q < 3 {
                return Err(Error::InvalidConfig(format!(
                    "quantile grid needs at least 3 points, got {q}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: usize,
    /// Minimum over thresholds of the p-value at this split time.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub start: usize,
    pub end: usize,
    /// First index of the right-hand part.
    pub tau_hat: usize,
    pub xth_hat: f64,
    pub p_min: f64,
    /// `ln(p_min)`, which stays finite where `p_min` would underflow.
    pub ln_p_min: f64,
    pub n_thresholds: usize,
    pub p_curve: Vec<CurvePoint>,
}

impl ScanResult {
    pub fn p_at(&self, tau: usize) -> Option<f64> {
        let first = self.p_curve.first()?.tau;
        self.p_curve.get(tau.checked_sub(first)?).map(|c| c.p)
    }
}

fn check_window(series: &ReturnSeries, window: &Range<usize>) -> Result<()> {
    if window.start >= window.end || window.end > series.len() {
        return Err(Error::InvalidWindow {
            start: window.start,
            end: window.end,
            len: series.len(),
        });
    }
    Ok(())
}

/// Quadrant counts for a split of `window` at `tau`: `[start, tau)` against
/// `[tau, end)`, and `> x_th` against `<= x_th`.
pub fn count_quadrants(
    series: &ReturnSeries,
    window: Range<usize>,
    tau: usize,
    x_th: f64,
) -> Result<ContingencyTable> {
    check_window(series, &window)?;
    if tau <= window.start || tau >= window.end {
        return Err(Error::InvalidConfig(format!(
            "split {tau} is not strictly inside window {}..{}",
            window.start, window.end
        )));
    }
    let v = series.values();
    let above = |r: Range<usize>| v[r].iter().filter(|&&x| x > x_th).count() as u64;
    let a = above(window.start..tau);
    let c = above(tau..window.end);
    Ok(ContingencyTable::new(
        a,
        (tau - window.start) as u64 - a,
        c,
        (window.end - tau) as u64 - c,
    ))
}

/// Candidate value thresholds for a window, sorted ascending.
///
/// The window maximum is never a candidate: everything would fall on the
/// `<=` side.
pub fn candidate_thresholds(
    series: &ReturnSeries,
    window: Range<usize>,
    mode: ThresholdMode,
) -> Result<Vec<f64>> {
    check_window(series, &window)?;
    let mut sorted = series.values()[window].to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mode = match mode {
        ThresholdMode::Auto if n <= AUTO_ALL_VALUES_MAX_LEN => ThresholdMode::AllUniqueValues,
        ThresholdMode::Auto => ThresholdMode::QuantileGrid(AUTO_GRID_POINTS),
        m => m,
    };
    let mut out: Vec<f64> = match mode {
        ThresholdMode::QuantileGrid(q) => {
            if q < 3 {
                return Err(Error::InvalidConfig(format!(
                    "quantile grid needs at least 3 points, got {q}"
                )));
            }
            // inverse empirical CDF: smallest x with F(x) >= k / (q - 1)
            (0..q)
                .map(|k| {
                    let rank = (k * n).div_ceil(q - 1).max(1);
                    sorted[rank - 1]
                })
                .collect()
        }
        _ => sorted.clone(),
    };
    out.dedup();
    let max = sorted[n - 1];
    out.retain(|&x| x < max);
    Ok(out)
}

/// Running minimum of `(ln p, threshold index)` per split time.
type Best = Vec<(f64, usize)>;

fn merge(mut acc: Best, other: Best) -> Best {
    for (x, y) in acc.iter_mut().zip(other) {
        if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
            *x = y;
        }
    }
    acc
}

/// Minimizes the p-value over every split time in
/// `[start + min_side, end - min_side]` and every candidate threshold.
///
/// Ties go to the smallest split time, then the smallest threshold. The
/// result does not depend on the size of the rayon thread pool.
pub fn min_p_scan(
    series: &ReturnSeries,
    window: Range<usize>,
    cfg: &ScanConfig,
    lf: &LogFactorialTable,
) -> Result<ScanResult> {
    cfg.validate()?;
    check_window(series, &window)?;
    let len = window.len();
    if len < 2 * cfg.min_side {
        return Err(Error::Unsplittable {
            len,
            min_side: cfg.min_side,
        });
    }
    if !lf.covers(len as u64) {
        return Err(Error::TableTooSmall {
            needed: len,
            covered: lf.max_n(),
        });
    }

    let values = &series.values()[window.clone()];
    let thresholds = candidate_thresholds(series, window.clone(), cfg.threshold_mode)?;
    let first = cfg.min_side;
    let n_taus = len - 2 * cfg.min_side + 1;

    if thresholds.is_empty() {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(ScanResult {
            start: window.start,
            end: window.end,
            tau_hat: window.start + first,
            xth_hat: max,
            p_min: 1.0,
            ln_p_min: 0.0,
            n_thresholds: 0,
            p_curve: (0..n_taus)
                .map(|i| CurvePoint {
                    tau: window.start + first + i,
                    p: 1.0,
                })
                .collect(),
        });
    }

    let identity = || vec![(f64::INFINITY, usize::MAX); n_taus];
    let best = thresholds
        .par_iter()
        .enumerate()
        .fold(identity, |mut acc, (j, &x)| {
            let total_above = values.iter().filter(|&&v| v > x).count() as u64;
            let mut a = values[..first].iter().filter(|&&v| v > x).count() as u64;
            let mut left = first as u64;
            for (i, slot) in acc.iter_mut().enumerate() {
                let table = ContingencyTable::new(
                    a,
                    left - a,
                    total_above - a,
                    len as u64 - left - (total_above - a),
                );
                let lp = ln_p_unchecked(&table, lf, cfg.variant);
                if lp < slot.0 || (lp == slot.0 && j < slot.1) {
                    *slot = (lp, j);
                }
                if i + 1 < n_taus {
                    if values[first + i] > x {
                        a += 1;
                    }
                    left += 1;
                }
            }
            acc
        })
        .reduce(identity, merge);

    // strict comparison keeps the earliest tau among equal minima
    let mut i_hat = 0;
    for (i, b) in best.iter().enumerate().skip(1) {
        if b.0 < best[i_hat].0 {
            i_hat = i;
        }
    }
    let (ln_p_min, j_hat) = best[i_hat];

    let to_p = |lp: f64| lp.exp().clamp(f64::MIN_POSITIVE, 1.0);
    Ok(ScanResult {
        start: window.start,
        end: window.end,
        tau_hat: window.start + first + i_hat,
        xth_hat: thresholds[j_hat],
        p_min: to_p(ln_p_min),
        ln_p_min,
        n_thresholds: thresholds.len(),
        p_curve: best
            .iter()
            .enumerate()
            .map(|(i, b)| CurvePoint {
                tau: window.start + first + i,
                p: to_p(b.0),
            })
            .collect(),
    })
}
