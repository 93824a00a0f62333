//! Recursive binary segmentation and per-segment summaries.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_test::LogFactorialTable;
use crate::numeric::{compensated_sum, mean, std_dev};
use crate::scan::{min_p_scan, ScanConfig, ScanResult};
use crate::series::ReturnSeries;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StdDivisor {
    /// Divide by the segment length.
    #[default]
    Population,
    /// Divide by the segment length minus one.
    Sample,
}

impl StdDivisor {
    fn ddof(self) -> usize {
        match self {
            StdDivisor::Population => 0,
            StdDivisor::Sample => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// A split is accepted when its minimum p-value is strictly below this.
    pub p_th: f64,
    pub scan: ScanConfig,
    /// Splits are attempted only at depths `0..max_depth`.
    pub max_depth: usize,
    pub std_divisor: StdDivisor,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            p_th: 1e-5,
            scan: ScanConfig::default(),
            max_depth: 32,
            std_divisor: StdDivisor::Population,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_th > 0.0 && self.p_th < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "p_th must lie in (0, 1), got {}",
                self.p_th
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
        }
        self.scan.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub mean: f64,
    pub std: f64,
    /// p-value of the split that created this segment's left boundary.
    pub accept_p: Option<f64>,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// An accepted split. `path` locates the split in the binary tree: `""` is
/// the root, `"L"`/`"R"` its children, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub path: String,
    pub depth: usize,
    pub start: usize,
    pub end: usize,
    pub tau: usize,
    pub xth: f64,
    pub p: f64,
    pub ln_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// Left to right, tiling the series.
    pub segments: Vec<Segment>,
    /// Accepted splits in depth-first, left-first order.
    pub splits: Vec<SplitNode>,
    /// Scan of the whole series, absent when it was too short to split.
    pub root_scan: Option<ScanResult>,
}

struct Branch {
    windows: Vec<Range<usize>>,
    splits: Vec<SplitNode>,
    scan: Option<ScanResult>,
}

fn descend(
    series: &ReturnSeries,
    window: Range<usize>,
    depth: usize,
    path: String,
    cfg: &SegmentationConfig,
    lf: &LogFactorialTable,
) -> Result<Branch> {
    let scan = match min_p_scan(series, window.clone(), &cfg.scan, lf) {
        Ok(s) => s,
        Err(Error::Unsplittable { .. }) => {
            return Ok(Branch {
                windows: vec![window],
                splits: vec![],
                scan: None,
            })
        }
        Err(e) => return Err(e),
    };
    if depth >= cfg.max_depth || scan.ln_p_min >= cfg.p_th.ln() {
        return Ok(Branch {
            windows: vec![window],
            splits: vec![],
            scan: Some(scan),
        });
    }

    let node = SplitNode {
        path: path.clone(),
        depth,
        start: window.start,
        end: window.end,
        tau: scan.tau_hat,
        xth: scan.xth_hat,
        p: scan.p_min,
        ln_p: scan.ln_p_min,
    };
    let (left, right) = rayon::join(
        || descend(series, window.start..scan.tau_hat, depth + 1, format!("{path}L"), cfg, lf),
        || descend(series, scan.tau_hat..window.end, depth + 1, format!("{path}R"), cfg, lf),
    );
    let (left, right) = (left?, right?);

    let mut splits = Vec::with_capacity(1 + left.splits.len() + right.splits.len());
    splits.push(node);
    splits.extend(left.splits);
    splits.extend(right.splits);
    let mut windows = left.windows;
    windows.extend(right.windows);
    Ok(Branch {
        windows,
        splits,
        scan: Some(scan),
    })
}

/// Splits `series` recursively at the minimum-p boundary while that p-value
/// is below `cfg.p_th`.
pub fn recursive_segment(
    series: &ReturnSeries,
    cfg: &SegmentationConfig,
    lf: &LogFactorialTable,
) -> Result<Segmentation> {
    cfg.validate()?;
    if !lf.covers(series.len() as u64) {
        return Err(Error::TableTooSmall {
            needed: series.len(),
            covered: lf.max_n(),
        });
    }
    let root = descend(series, 0..series.len(), 0, String::new(), cfg, lf)?;
    let ddof = cfg.std_divisor.ddof();
    let segments = root
        .windows
        .into_iter()
        .map(|w| {
            let v = &series.values()[w.clone()];
            Segment {
                start: w.start,
                end: w.end,
                mean: mean(v),
                std: std_dev(v, ddof),
                accept_p: root.splits.iter().find(|s| s.tau == w.start).map(|s| s.p),
            }
        })
        .collect();
    Ok(Segmentation {
        segments,
        splits: root.splits,
        root_scan: root.scan,
    })
}

/// One row of the descriptive statistics table. Labels are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub no: usize,
    pub start: String,
    pub end: String,
    pub mean: f64,
    pub std: f64,
}

pub fn segment_stats(
    series: &ReturnSeries,
    segments: &[Segment],
    divisor: StdDivisor,
) -> Result<Vec<SegmentRow>> {
    let mut expected = 0;
    for s in segments {
        if s.start != expected || s.end <= s.start {
            return Err(Error::InvalidConfig(format!(
                "segments do not partition the series at {}..{}",
                s.start, s.end
            )));
        }
        expected = s.end;
    }
    if expected != series.len() {
        return Err(Error::InvalidConfig(format!(
            "segments cover 0..{expected} but the series has {} values",
            series.len()
        )));
    }
    Ok(segments
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let v = &series.values()[s.range()];
            SegmentRow {
                no: k + 1,
                start: series.label(s.start),
                end: series.label(s.end - 1),
                mean: mean(v),
                std: std_dev(v, divisor.ddof()),
            }
        })
        .collect())
}

/// Exponential price curve `R(t) = exp(mu * (t - t0) + rho)` over one
/// segment. The local coordinate `t - t0` runs `1..=len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub mu: f64,
    pub rho: f64,
    pub start: usize,
    pub end: usize,
}

impl TrendFit {
    /// Fitted price at index `i` of the price array.
    pub fn fitted(&self, i: usize) -> f64 {
        (self.mu * self.coordinate(i) + self.rho).exp()
    }

    fn coordinate(&self, i: usize) -> f64 {
        (i as f64) - (self.start as f64) + 1.0
    }

    /// `ln R(t) - mu * (t - t0) - rho` over the segment.
    pub fn residuals(&self, prices: &[f64]) -> Vec<f64> {
        (self.start..self.end)
            .map(|i| prices[i].ln() - self.mu * self.coordinate(i) - self.rho)
            .collect()
    }
}

/// Least-squares intercept of the log-price line with fixed slope `mu` over
/// `prices[segment]`.
pub fn fit_trend(prices: &[f64], segment: Range<usize>, mu: f64) -> Result<TrendFit> {
    if segment.is_empty() || segment.end > prices.len() {
        return Err(Error::InvalidWindow {
            start: segment.start,
            end: segment.end,
            len: prices.len(),
        });
    }
    if let Some(i) = segment.clone().find(|&i| !(prices[i].is_finite() && prices[i] > 0.0)) {
        return Err(Error::NonPositivePrice {
            index: i,
            value: prices[i],
        });
    }
    let len = segment.len();
    let rho = compensated_sum(
        segment
            .clone()
            .enumerate()
            .map(|(j, i)| prices[i].ln() - mu * (j + 1) as f64),
    ) / len as f64;
    Ok(TrendFit {
        mu,
        rho,
        start: segment.start,
        end: segment.end,
    })
}
