use std::fs;
use std::io::Write;
use std::path::Path;

use fishseg::exact_test::LogFactorialTable;
use fishseg::scan::{min_p_scan, CurvePoint, ScanResult};
use fishseg::segmenter::{fit_trend, recursive_segment, segment_stats, SegmentationConfig, TrendFit};
use fishseg::synth::{shuffle, sigma_sweep, SweepRow, SynthModel};
use fishseg::ReturnSeries;
use serde::{Deserialize, Serialize};

use crate::args::{Command, ScanArgs, SegmentArgs, ShuffleArgs, SimulateArgs};
use crate::error::CliError;
use crate::ingest::{ingest, price_path};

pub const TOOL: &str = "fishseg";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shuffled p-values above this count as "not significant" in the summary.
const NULL_LEVEL: f64 = 1e-2;

/// Self-contained record of one run; `config` reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub tool: String,
    pub version: String,
    pub config: Command,
    pub result: T,
}

impl<T> Report<T> {
    fn new(config: &Command, result: T) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            config: config.clone(),
            result,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub no: usize,
    pub start: usize,
    pub end: usize,
    pub start_label: String,
    pub end_label: String,
    pub mean: f64,
    pub std: f64,
    pub accept_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub path: String,
    pub depth: usize,
    pub tau: usize,
    pub label: String,
    pub xth: f64,
    pub p: f64,
    pub ln_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentOutcome {
    pub n_observations: usize,
    pub segments: Vec<SegmentEntry>,
    pub splits: Vec<SplitEntry>,
    /// Root-level p-value curve; empty when the series is too short to split.
    pub p_curve: Vec<CurvePoint>,
    pub trend_fits: Vec<TrendFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuffleRow {
    pub shuffle: usize,
    pub seed: u64,
    pub p_min: f64,
    pub tau_hat: usize,
    pub frac_above: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuffleOutcome {
    pub original_p_min: f64,
    pub original_tau_hat: usize,
    pub shuffles: Vec<ShuffleRow>,
}

/// p-values in scientific notation with six significant digits.
pub fn fmt_p(p: f64) -> String {
    format!("{p:.5e}")
}

pub fn run(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Scan(a) => cmd_scan(command, a),
        Command::Segment(a) => cmd_segment(command, a),
        Command::Simulate(a) => cmd_simulate(command, a),
        Command::ShuffleTest(a) => cmd_shuffle_test(command, a),
    }
}

fn create(dir: &Path, name: &str) -> Result<fs::File, CliError> {
    fs::create_dir_all(dir)?;
    Ok(fs::File::create(dir.join(name))?)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_p_curve(dir: &Path, name: &str, series: &ReturnSeries, curve: &[CurvePoint]) -> Result<(), CliError> {
    let mut out = String::with_capacity(curve.len() * 24);
    for c in curve {
        out.push_str(&format!("{}\t{}\n", series.label(c.tau), fmt_p(c.p)));
    }
    create(dir, name)?.write_all(out.as_bytes())?;
    Ok(())
}

fn table_for(n: usize) -> Result<LogFactorialTable, CliError> {
    Ok(LogFactorialTable::build(n)?)
}

fn scan_whole(series: &ReturnSeries, args: &crate::args::ScanFlags) -> Result<ScanResult, CliError> {
    let lf = table_for(series.len())?;
    Ok(min_p_scan(series, 0..series.len(), &args.config(), &lf)?)
}

pub fn cmd_scan(command: &Command, a: &ScanArgs) -> Result<String, CliError> {
    let series = ingest(&a.input.spec())?;
    let result = scan_whole(&series, &a.scan)?;
    write_p_curve(&a.out_dir, "p_curve.tsv", &series, &result.p_curve)?;
    let summary = format!(
        "tau_hat {} ({}), x_th {}, p_min {}\n",
        result.tau_hat,
        series.label(result.tau_hat),
        result.xth_hat,
        fmt_p(result.p_min)
    );
    write_json(&a.out_dir, "scan.json", &Report::new(command, result))?;
    Ok(summary)
}

pub fn cmd_segment(command: &Command, a: &SegmentArgs) -> Result<String, CliError> {
    let spec = a.input.spec();
    let series = ingest(&spec)?;
    let prices = price_path(&spec, &series)?;
    let cfg = SegmentationConfig {
        p_th: a.p_th,
        scan: a.scan.config(),
        max_depth: a.max_depth,
        std_divisor: a.std,
    };
    let lf = table_for(series.len())?;
    let seg = recursive_segment(&series, &cfg, &lf)?;
    let rows = segment_stats(&series, &seg.segments, a.std)?;

    let mut csv = csv::Writer::from_writer(create(&a.out_dir, "segments.csv")?);
    csv.write_record(["no", "start", "end", "mean", "std"])
        .map_err(|e| CliError::Other(e.to_string()))?;
    for r in &rows {
        csv.write_record([r.no.to_string(), r.start.clone(), r.end.clone(), r.mean.to_string(), r.std.to_string()])
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    csv.flush()?;

    let mut fits = Vec::with_capacity(seg.segments.len());
    let mut fit_tsv = String::new();
    for s in &seg.segments {
        let fit = fit_trend(&prices, s.range(), s.mean)?;
        for t in s.range() {
            fit_tsv.push_str(&format!("{t}\t{}\n", fit.fitted(t)));
        }
        fits.push(fit);
    }
    create(&a.out_dir, "fit.tsv")?.write_all(fit_tsv.as_bytes())?;

    let p_curve = seg.root_scan.as_ref().map(|s| s.p_curve.clone()).unwrap_or_default();
    write_p_curve(&a.out_dir, "p_curve.tsv", &series, &p_curve)?;

    let splits: Vec<SplitEntry> = seg
        .splits
        .iter()
        .map(|s| SplitEntry {
            path: s.path.clone(),
            depth: s.depth,
            tau: s.tau,
            label: series.label(s.tau),
            xth: s.xth,
            p: s.p,
            ln_p: s.ln_p,
        })
        .collect();
    write_json(&a.out_dir, "splits.json", &splits)?;

    let segments: Vec<SegmentEntry> = seg
        .segments
        .iter()
        .zip(&rows)
        .map(|(s, r)| SegmentEntry {
            no: r.no,
            start: s.start,
            end: s.end,
            start_label: r.start.clone(),
            end_label: r.end.clone(),
            mean: r.mean,
            std: r.std,
            accept_p: s.accept_p,
        })
        .collect();
    let mut summary = format!("{} segments\n", segments.len());
    for s in &segments {
        summary.push_str(&format!(
            "{:>3}  {} .. {}  mean {:.6}  std {:.6}\n",
            s.no, s.start_label, s.end_label, s.mean, s.std
        ));
    }
    let outcome = SegmentOutcome {
        n_observations: series.len(),
        segments,
        splits,
        p_curve,
        trend_fits: fits,
    };
    write_json(&a.out_dir, "report.json", &Report::new(command, outcome))?;
    Ok(summary)
}

pub fn cmd_simulate(command: &Command, a: &SimulateArgs) -> Result<String, CliError> {
    let mut template = SynthModel::of_kind(a.model.into(), 0.0);
    template.length = a.length;
    template.change_at = a.change_at;
    if let Some(shift) = a.shift {
        template.shift = shift;
    }
    template.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let sweep = sigma_sweep(&template, &a.sigma, &a.seeds.0, &a.scan.config())?;

    let mut out = String::from("sigma,seed,p_min,tau_hat\n");
    for r in &sweep.rows {
        out.push_str(&format!("{},{},{},{}\n", r.sigma, r.seed, fmt_p(r.p_min), r.tau_hat));
    }
    create(&a.out_dir, "sweep.csv")?.write_all(out.as_bytes())?;
    let rows: Vec<SweepRow> = sweep.rows;
    let summary = format!("{} rows written to {}\n", rows.len(), a.out_dir.join("sweep.csv").display());
    write_json(&a.out_dir, "report.json", &Report::new(command, rows))?;
    Ok(summary)
}

pub fn cmd_shuffle_test(command: &Command, a: &ShuffleArgs) -> Result<String, CliError> {
    let series = ingest(&a.input.spec())?;
    let original = scan_whole(&series, &a.scan)?;
    let mut rows = Vec::with_capacity(a.n_shuffles);
    for k in 0..a.n_shuffles {
        let seed = a.seed.wrapping_add(k as u64);
        let shuffled = shuffle(&series, seed);
        let r = scan_whole(&shuffled, &a.scan)?;
        let above = r.p_curve.iter().filter(|c| c.p > NULL_LEVEL).count();
        write_p_curve(&a.out_dir, &format!("shuffle_{:04}_p_curve.tsv", k + 1), &shuffled, &r.p_curve)?;
        rows.push(ShuffleRow {
            shuffle: k + 1,
            seed,
            p_min: r.p_min,
            tau_hat: r.tau_hat,
            frac_above: above as f64 / r.p_curve.len() as f64,
        });
    }

    let mut out = format!(
        "# seed={} n_shuffles={} original_p_min={} original_tau_hat={}\n",
        a.seed,
        a.n_shuffles,
        fmt_p(original.p_min),
        original.tau_hat
    );
    out.push_str("shuffle,seed,p_min,tau_hat,frac_p_above_1e-2\n");
    for r in &rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.shuffle, r.seed, fmt_p(r.p_min), r.tau_hat, r.frac_above));
    }
    create(&a.out_dir, "shuffle_summary.csv")?.write_all(out.as_bytes())?;
    write_p_curve(&a.out_dir, "original_p_curve.tsv", &series, &original.p_curve)?;

    let smallest = rows.iter().map(|r| r.p_min).fold(f64::INFINITY, f64::min);
    let summary = format!(
        "original p_min {}; smallest shuffled p_min {} over {} shuffles\n",
        fmt_p(original.p_min),
        if rows.is_empty() { "n/a".into() } else { fmt_p(smallest) },
        rows.len()
    );
    let outcome = ShuffleOutcome {
        original_p_min: original.p_min,
        original_tau_hat: original.tau_hat,
        shuffles: rows,
    };
    write_json(&a.out_dir, "report.json", &Report::new(command, outcome))?;
    Ok(summary)
}
