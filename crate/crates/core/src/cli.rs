//! The `ffs` command line: constrain one box, evaluate a split, sweep
//! parameters, or time the heuristic.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::eval::{
    bench, evaluate_dataset, grid_search, Baseline, EvalReport, EvalSettings, GridSpec, KittiDataset,
};
use crate::ffs::{self, run_ffs, HeuristicParams};
use crate::kitti::{load_calibration, load_point_cloud, velo_to_rect, Box2D, ObjectClass};

#[derive(Debug, Parser)]
#[command(name = "ffs", version, about = "Constrain frustum regions of interest around the densest LiDAR slab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Constrain the frustum of a single 2D box in one frame.
    Constrain(ConstrainArgs),
    /// Score the constrained RoI center against ground truth over a split.
    Evaluate(EvaluateArgs),
    /// Evaluate every cell of a parameter grid.
    Gridsearch(GridArgs),
    /// Time the heuristic per frustum.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Ffs,
    GtCenter,
}

impl From<BaselineArg> for Baseline {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Ffs => Baseline::Ffs,
            BaselineArg::GtCenter => Baseline::GtCenter,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// KITTI-style root holding velodyne/, calib/ and label_2/.
    #[arg(long, env = "FFS_DATA_ROOT")]
    pub data_root: PathBuf,
    /// Newline-separated frame ids; defaults to every velodyne scan.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "Car,Pedestrian,Cyclist")]
    pub classes: Vec<ObjectClass>,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, default_value_t = ffs::DEFAULT_BIN_LENGTH)]
    pub bin_length: f64,
    #[arg(long, default_value_t = ffs::DEFAULT_NEIGHBOR_BINS)]
    pub neighbor_bins: usize,
    /// Weight each point adds to neighboring bins.
    #[arg(long, default_value_t = ffs::DEFAULT_WEIGHT)]
    pub weight: f64,
    #[arg(long, default_value_t = ffs::DEFAULT_ROI_LENGTH)]
    pub roi_length: f64,
    #[arg(long, default_value_t = ffs::DEFAULT_FAR_PLANE)]
    pub far_plane: f64,
    /// Pixels added to each side of the 2D box before lifting.
    #[arg(long, default_value_t = 0.0)]
    pub box_dilation: f64,
}

impl ParamArgs {
    pub fn params(&self) -> HeuristicParams {
        HeuristicParams {
            bin_length: self.bin_length,
            neighbor_bins: self.neighbor_bins,
            weight: self.weight,
            roi_length: self.roi_length,
            far_plane: self.far_plane,
            box_dilation: self.box_dilation,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Artifact path; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ConstrainArgs {
    #[arg(long, env = "FFS_DATA_ROOT")]
    pub data_root: PathBuf,
    #[arg(long)]
    pub frame: String,
    /// Image box as x_min,y_min,x_max,y_max in pixels.
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
    pub bbox: Vec<f64>,
    #[arg(long, default_value = "Car")]
    pub class: ObjectClass,
    /// Also emit the velodyne indices of the retained points.
    #[arg(long)]
    pub indices: bool,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = BaselineArg::Ffs)]
    pub baseline: BaselineArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma list and/or start:step:stop ranges.
    #[arg(long, default_value = "0.75")]
    pub bin_length: String,
    #[arg(long, default_value = "7")]
    pub neighbor_bins: String,
    #[arg(long, default_value = "1.0")]
    pub weight: String,
    #[arg(long, default_value = "30")]
    pub roi_length: String,
    #[arg(long, default_value_t = ffs::DEFAULT_FAR_PLANE)]
    pub far_plane: f64,
    #[arg(long, default_value_t = 0.0)]
    pub box_dilation: f64,
    #[arg(long, value_enum, default_value_t = BaselineArg::Ffs)]
    pub baseline: BaselineArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Constrain(args) => cmd_constrain(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Gridsearch(args) => cmd_gridsearch(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

#[derive(Debug, Serialize)]
struct ConstrainOutput {
    frame_id: String,
    class: ObjectClass,
    c: f64,
    near: f64,
    far: f64,
    points_before: usize,
    points_after: usize,
    fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    indices: Option<Vec<usize>>,
}

pub fn cmd_constrain(args: &ConstrainArgs) -> Result<()> {
    let params = args.params.params();
    params.validate()?;
    let [x_min, y_min, x_max, y_max] = <[f64; 4]>::try_from(args.bbox.as_slice())
        .map_err(|_| anyhow::anyhow!("--box needs exactly four values"))?;
    let bbox = Box2D::new(x_min, y_min, x_max, y_max, args.class)?;
    let root = &args.data_root;
    let cloud = load_point_cloud(root.join("velodyne").join(format!("{}.bin", args.frame)))?;
    let calib = load_calibration(root.join("calib").join(format!("{}.txt", args.frame)))?;
    let rect = velo_to_rect(&cloud, &calib)?;
    let out = run_ffs(&rect, &bbox, &calib, &params)?;
    let result = ConstrainOutput {
        frame_id: args.frame.clone(),
        class: args.class,
        c: out.roi.c,
        near: out.roi.near_c,
        far: out.roi.far_c,
        points_before: out.points_before,
        points_after: out.retained.len(),
        fallback: out.fallback,
        indices: args.indices.then(|| out.retained.indices.clone()),
    };
    let bytes = match args.output.format {
        Format::Json => json_bytes(&result)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["frame_id", "class", "c", "near", "far", "points_before", "points_after", "fallback"])?;
            w.write_record([
                result.frame_id.clone(),
                result.class.to_string(),
                result.c.to_string(),
                result.near.to_string(),
                result.far.to_string(),
                result.points_before.to_string(),
                result.points_after.to_string(),
                result.fallback.to_string(),
            ])?;
            w.into_inner()?
        }
    };
    emit(args.output.output.as_deref(), &bytes)
}

fn open_dataset(data: &DataArgs) -> Result<KittiDataset> {
    ensure!(data.parallelism >= 1, "--parallelism must be at least 1");
    Ok(KittiDataset::open(&data.data_root, data.split.as_deref())?)
}

#[derive(Debug, Serialize)]
struct EvaluateArtifact<'a> {
    settings: &'a EvalSettings,
    frames: usize,
    failed_frames: &'a [crate::eval::FrameFailure],
    report: &'a EvalReport,
    records: &'a [crate::eval::EvalRecord],
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let settings = EvalSettings {
        params: args.params.params(),
        baseline: args.baseline.into(),
        classes: args.data.classes.clone(),
    };
    settings.params.validate()?;
    let dataset = open_dataset(&args.data)?;
    let result = evaluate_dataset(&dataset, &settings, args.data.parallelism)?;
    for failure in &result.failures {
        eprintln!("frame {} failed: {}", failure.frame_id, failure.error);
    }
    if result.all_failed() {
        bail!("all {} frames failed", result.frames);
    }
    let report = crate::eval::aggregate(&result.records);
    let bytes = match args.output.format {
        Format::Json => json_bytes(&EvaluateArtifact {
            settings: &settings,
            frames: result.frames,
            failed_frames: &result.failures,
            report: &report,
            records: &result.records,
        })?,
        Format::Csv => csv_bytes(&result.records)?,
    };
    emit(args.output.output.as_deref(), &bytes)?;
    print_summary(args.output.output.is_some(), &summary_lines(&report, result.frames, result.failures.len()));
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

fn summary_lines(report: &EvalReport, frames: usize, failed: usize) -> Vec<String> {
    let mut lines = vec![format!("frames: {frames} ({failed} failed), objects: {}", report.overall.records)];
    for g in report.per_class.iter().chain([&report.pedestrian_cyclist, &report.overall]) {
        lines.push(format!(
            "{:<20} n={:<6} fallback={:<4} rmse={} m  contained={}  reduction={}",
            g.group,
            g.records,
            g.fallbacks,
            fmt_opt(g.rmse),
            fmt_opt(g.containment_rate_non_fallback),
            fmt_opt(g.mean_reduction_ratio)
        ));
    }
    lines
}

/// Human-readable output goes to stdout when the artifact is in a file and
/// to stderr when the artifact itself is on stdout.
fn print_summary(artifact_in_file: bool, lines: &[String]) {
    for line in lines {
        if artifact_in_file {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

#[derive(Debug, Serialize)]
struct GridRow {
    bin_length: f64,
    neighbor_bins: usize,
    weight: f64,
    roi_length: f64,
    far_plane: f64,
    records: Option<usize>,
    fallbacks: Option<usize>,
    rmse: Option<f64>,
    car_rmse: Option<f64>,
    pedestrian_cyclist_rmse: Option<f64>,
    containment_rate: Option<f64>,
    mean_reduction_ratio: Option<f64>,
    error: Option<String>,
}

pub fn cmd_gridsearch(args: &GridArgs) -> Result<()> {
    let grid = GridSpec {
        bin_lengths: parse_f64_spec(&args.bin_length).context("--bin-length")?,
        neighbor_bins: parse_usize_spec(&args.neighbor_bins).context("--neighbor-bins")?,
        weights: parse_f64_spec(&args.weight).context("--weight")?,
        roi_lengths: parse_f64_spec(&args.roi_length).context("--roi-length")?,
        far_plane: args.far_plane,
        box_dilation: args.box_dilation,
    };
    ensure!(grid.bin_lengths.iter().all(|&b| b > 0.0), "--bin-length values must be > 0");
    ensure!(grid.roi_lengths.iter().all(|&h| h > 0.0), "--roi-length values must be > 0");
    ensure!(grid.weights.iter().all(|&w| w >= 0.0), "--weight values must be >= 0");
    ensure!(args.far_plane > 0.0, "--far-plane must be > 0");
    let dataset = open_dataset(&args.data)?;
    let result = grid_search(&dataset, &grid, args.baseline.into(), &args.data.classes, args.data.parallelism)?;
    for failure in &result.failures {
        eprintln!("frame {} failed: {}", failure.frame_id, failure.error);
    }
    if result.frames > 0 && result.failures.len() == result.frames {
        bail!("all {} frames failed", result.frames);
    }
    let rows: Vec<GridRow> = result
        .cells
        .iter()
        .map(|cell| {
            let r = cell.report.as_ref();
            GridRow {
                bin_length: cell.params.bin_length,
                neighbor_bins: cell.params.neighbor_bins,
                weight: cell.params.weight,
                roi_length: cell.params.roi_length,
                far_plane: cell.params.far_plane,
                records: r.map(|r| r.overall.records),
                fallbacks: r.map(|r| r.overall.fallbacks),
                rmse: r.and_then(|r| r.overall.rmse),
                car_rmse: r.and_then(|r| r.class(ObjectClass::Car).rmse),
                pedestrian_cyclist_rmse: r.and_then(|r| r.pedestrian_cyclist.rmse),
                containment_rate: r.and_then(|r| r.overall.containment_rate_non_fallback),
                mean_reduction_ratio: r.and_then(|r| r.overall.mean_reduction_ratio),
                error: cell.error.clone(),
            }
        })
        .collect();
    let bytes = match args.output.format {
        Format::Json => json_bytes(&rows)?,
        Format::Csv => csv_bytes(&rows)?,
    };
    emit(args.output.output.as_deref(), &bytes)?;
    let mut lines = vec![format!("{} cells over {} frames", rows.len(), result.frames)];
    if let Some(best) = rows.first() {
        lines.push(format!(
            "best: bin_length={} neighbor_bins={} weight={} roi_length={} rmse={}",
            best.bin_length,
            best.neighbor_bins,
            best.weight,
            best.roi_length,
            fmt_opt(best.rmse)
        ));
    }
    print_summary(args.output.output.is_some(), &lines);
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    ensure!(args.repetitions >= 1, "--repetitions must be at least 1");
    let settings = EvalSettings {
        params: args.params.params(),
        baseline: Baseline::Ffs,
        classes: args.data.classes.clone(),
    };
    let dataset = open_dataset(&args.data)?;
    let summary = bench(&dataset, &settings, args.repetitions)?;
    emit(args.output.as_deref(), &json_bytes(&summary)?)
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(w.into_inner()?)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Parses `"0.5,0.75"`, `"0.05:0.05:2.0"`, or a mix. Ranges include `stop`
/// and values are snapped to nine decimals to avoid accumulated step error.
pub fn parse_f64_spec(spec: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim) {
        ensure!(!part.is_empty(), "empty entry in {spec:?}");
        let nums = part
            .split(':')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("invalid number {s:?}")))
            .collect::<Result<Vec<_>>>()?;
        ensure!(nums.iter().all(|v| v.is_finite()), "non-finite value in {part:?}");
        match nums[..] {
            [v] => out.push(v),
            [start, step, stop] => {
                ensure!(step > 0.0, "range step must be > 0 in {part:?}");
                ensure!(stop >= start, "range stop must be >= start in {part:?}");
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                for i in 0..=n {
                    out.push(snap(start + i as f64 * step));
                }
            }
            _ => bail!("expected a number or start:step:stop, got {part:?}"),
        }
    }
    Ok(out)
}

fn snap(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

pub fn parse_usize_spec(spec: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim) {
        ensure!(!part.is_empty(), "empty entry in {spec:?}");
        let nums = part
            .split(':')
            .map(|s| s.trim().parse::<usize>().with_context(|| format!("invalid integer {s:?}")))
            .collect::<Result<Vec<_>>>()?;
        match nums[..] {
            [v] => out.push(v),
            [start, step, stop] => {
                ensure!(step > 0, "range step must be > 0 in {part:?}");
                ensure!(stop >= start, "range stop must be >= start in {part:?}");
                out.extend((start..=stop).step_by(step));
            }
            _ => bail!("expected an integer or start:step:stop, got {part:?}"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_ranges() {
        let v = parse_f64_spec("0.05:0.05:2.0").unwrap();
        assert_eq!(v.len(), 40);
        assert_eq!(v[0], 0.05);
        assert_eq!(v[14], 0.75);
        assert_eq!(v[39], 2.0);
        assert_eq!(parse_f64_spec("10,20,26,30,40,50,60,70").unwrap().len(), 8);
        assert_eq!(parse_f64_spec("1, 2:1:4").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn integer_ranges() {
        assert_eq!(parse_usize_spec("0:1:10").unwrap(), (0..=10).collect::<Vec<_>>());
        assert_eq!(parse_usize_spec("0:3:10").unwrap(), vec![0, 3, 6, 9]);
    }

    #[test]
    fn bad_specs() {
        for spec in ["", "a", "1:0:2", "2:1:1", "1:2", "1,,2", "nan"] {
            assert!(parse_f64_spec(spec).is_err(), "{spec}");
        }
        assert!(parse_usize_spec("-1").is_err());
        assert!(parse_usize_spec("0:0:3").is_err());
    }

    #[test]
    fn defaults_match_reference_values() {
        let cli = Cli::try_parse_from(["ffs", "evaluate", "--data-root", "/tmp/x"]).unwrap();
        let Command::Evaluate(args) = cli.command else { panic!() };
        let p = args.params.params();
        assert_eq!((p.bin_length, p.neighbor_bins, p.far_plane), (0.75, 7, 70.0));
        assert_eq!(args.data.classes, ObjectClass::ALL.to_vec());
        assert_eq!(args.data.parallelism, 1);
        assert_eq!(args.baseline, BaselineArg::Ffs);
    }

    #[test]
    fn box_flag_accepts_negative_values() {
        let cli = Cli::try_parse_from([
            "ffs", "constrain", "--data-root", "/tmp/x", "--frame", "000001", "--box", "-1,-1,1,1",
        ])
        .unwrap();
        let Command::Constrain(args) = cli.command else { panic!() };
        assert_eq!(args.bbox, vec![-1.0, -1.0, 1.0, 1.0]);
    }
}
