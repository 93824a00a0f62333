//! Command-line arguments. Every argument struct is also serializable so a
//! run can echo its exact configuration into its report.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fishseg::scan::{ScanConfig, ThresholdMode};
use fishseg::segmenter::StdDivisor;
use fishseg::synth::ModelKind;
use fishseg::PValueVariant;
use serde::{Deserialize, Serialize};

use crate::ingest::{ColumnRef, InputFormat, InputSpec};

#[derive(Debug, Parser)]
#[command(name = "fishseg", version, about = "Fisher exact test change-point segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Find the single most significant split of the whole series.
    Scan(ScanArgs),
    /// Split recursively until no split is significant.
    Segment(SegmentArgs),
    /// Sweep the noise level of a synthetic model and record the scan result.
    Simulate(SimulateArgs),
    /// Scan randomly shuffled copies of the series.
    ShuffleTest(ShuffleArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// CSV file with one observation per row.
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, value_enum, default_value_t = InputFormat::Price)]
    pub format: InputFormat,

    /// Value column, by zero-based index or header name [default: last column].
    #[arg(long)]
    pub value_col: Option<ColumnRef>,

    /// Label column, by index or name; "none" disables labels
    /// [default: first column when there are two or more].
    #[arg(long)]
    pub label_col: Option<ColumnRef>,
}

impl InputArgs {
    pub fn spec(&self) -> InputSpec {
        InputSpec {
            path: self.input.clone(),
            format: self.format,
            value_col: self.value_col.clone(),
            label_col: self.label_col.clone(),
        }
    }
}

fn parse_thresholds(s: &str) -> Result<ThresholdMode, String> {
    match s {
        "auto" => Ok(ThresholdMode::Auto),
        "all" => Ok(ThresholdMode::AllUniqueValues),
        _ => {
            let q = s
                .strip_prefix("grid:")
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| format!("expected auto, all or grid:N, got {s:?}"))?;
            if q < 3 {
                return Err(format!("grid needs at least 3 points, got {q}"));
            }
            Ok(ThresholdMode::QuantileGrid(q))
        }
    }
}

fn parse_variant(s: &str) -> Result<PValueVariant, String> {
    match s {
        "standard" => Ok(PValueVariant::StandardTwoSided),
        "paper-literal" => Ok(PValueVariant::LiteralTails),
        _ => Err(format!("expected standard or paper-literal, got {s:?}")),
    }
}

fn parse_std(s: &str) -> Result<StdDivisor, String> {
    match s {
        "population" => Ok(StdDivisor::Population),
        "sample" => Ok(StdDivisor::Sample),
        _ => Err(format!("expected population or sample, got {s:?}")),
    }
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("must lie in (0, 1), got {p}"))
    }
}

fn parse_sigma(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("sigma must be a finite non-negative number, got {s}"))
    }
}

/// Seeds given as `a..b` (half-open) or a comma-separated list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeedList(pub Vec<u64>);

impl std::str::FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            (a..b).collect()
        } else {
            s.split(',')
                .map(|x| x.trim().parse::<u64>().map_err(|e| format!("{e}")))
                .collect::<Result<_, _>>()?
        };
        if seeds.is_empty() {
            return Err(format!("no seeds in {s:?}"));
        }
        Ok(SeedList(seeds))
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScanFlags {
    /// Minimum observations on each side of a split.
    #[arg(long, default_value_t = 2)]
    pub min_side: usize,

    /// Threshold candidates: auto, all, or grid:N.
    #[arg(long, default_value = "auto", value_parser = parse_thresholds)]
    pub thresholds: ThresholdMode,

    /// p-value formula: standard or paper-literal.
    #[arg(long, default_value = "standard", value_parser = parse_variant)]
    pub variant: PValueVariant,
}

impl ScanFlags {
    pub fn config(&self) -> ScanConfig {
        ScanConfig {
            min_side: self.min_side,
            threshold_mode: self.thresholds,
            variant: self.variant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub scan: ScanFlags,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub scan: ScanFlags,

    /// Significance level for accepting a split.
    #[arg(long, default_value = "1e-5", value_parser = parse_probability)]
    pub p_th: f64,

    #[arg(long, default_value_t = 32)]
    pub max_depth: usize,

    /// Standard deviation divisor: population or sample.
    #[arg(long, default_value = "population", value_parser = parse_std)]
    pub std: StdDivisor,

    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    /// Mean shift of 0.1 at index 50.
    Step,
    /// Slope of 0.001 per step from index 50.
    Trend,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Step => ModelKind::StepMean,
            ModelArg::Trend => ModelKind::LinearTrend,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Step)]
    pub model: ModelArg,

    /// Noise level; repeat or separate with commas.
    #[arg(long, required = true, value_delimiter = ',', value_parser = parse_sigma)]
    pub sigma: Vec<f64>,

    /// Seeds as a..b or a,b,c.
    #[arg(long, default_value = "0..20")]
    pub seeds: SeedList,

    #[arg(long, default_value_t = 150)]
    pub length: usize,

    #[arg(long, default_value_t = 50)]
    pub change_at: usize,

    /// Step height or slope [default: 0.1 for step, 0.001 for trend].
    #[arg(long)]
    pub shift: Option<f64>,

    #[command(flatten)]
    pub scan: ScanFlags,

    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ShuffleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub scan: ScanFlags,

    #[arg(long, default_value_t = 20)]
    pub n_shuffles: usize,

    /// Base seed; shuffle k uses seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}
