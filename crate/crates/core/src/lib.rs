//! Change-point segmentation of univariate time series.
//!
//! A candidate split of a window at time `tau` with value threshold `x_th`
//! induces a 2x2 table (before/after `tau` against above/at-or-below
//! `x_th`). The split with the smallest two-sided Fisher exact p-value is
//! accepted when that p-value is below a significance level, and the
//! procedure recurses into both halves.

pub mod error;
pub mod exact_test;
pub mod numeric;
pub mod scan;
pub mod segmenter;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
pub use exact_test::{
    brute_force_p, fisher_ln_p, fisher_p, point_probability, ContingencyTable, LogFactorialTable,
    PValueVariant,
};
pub use scan::{candidate_thresholds, count_quadrants, min_p_scan, ScanConfig, ScanResult, ThresholdMode};
pub use segmenter::{
    fit_trend, recursive_segment, segment_stats, Segment, SegmentRow, Segmentation, SegmentationConfig, SplitNode,
    StdDivisor, TrendFit,
};
pub use synth::{generate, shuffle, sigma_sweep, ModelKind, SweepResult, SweepRow, SynthModel};
pub use series::{log_returns, ReturnSeries};
