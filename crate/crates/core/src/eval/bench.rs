use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{EvalSettings, FrameSource};
use crate::error::{Error, Result};
use crate::ffs::run_ffs;
use crate::kitti::{velo_to_rect, Box2D, CalibrationSet, Frame, PointCloud};

/// Per-frustum latency of the heuristic, excluding file I/O and the
/// per-frame LiDAR transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub repetitions: usize,
    /// Frustums per pass.
    pub frustums: usize,
    pub samples: usize,
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
    pub min_us: f64,
    pub max_us: f64,
    /// Frustum points processed per second of measured time.
    pub points_per_second: f64,
    /// Cloud points scanned for frustum membership per second.
    pub scanned_points_per_second: f64,
}

impl TimingSummary {
    /// Builds the summary from per-frustum latencies in microseconds.
    pub fn from_samples(samples: &[f64], repetitions: usize, frustums: usize, points: u64, scanned: u64) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let total_us: f64 = samples.iter().sum();
        let per_second = |count: u64| {
            if total_us > 0.0 {
                count as f64 / (total_us * 1e-6)
            } else {
                0.0
            }
        };
        TimingSummary {
            repetitions,
            frustums,
            samples: n,
            mean_us: if n > 0 { total_us / n as f64 } else { 0.0 },
            median_us: median(&sorted),
            p95_us: nearest_rank(&sorted, 0.95),
            min_us: sorted.first().copied().unwrap_or(0.0),
            max_us: sorted.last().copied().unwrap_or(0.0),
            points_per_second: per_second(points),
            scanned_points_per_second: per_second(scanned),
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

struct Job {
    cloud: PointCloud,
    calib: CalibrationSet,
    boxes: Vec<Box2D>,
}

/// Times `run_ffs` for every selected ground-truth box. One untimed warm-up
/// pass precedes `repetitions` timed passes. Runs on the calling thread.
pub fn bench<S: FrameSource + ?Sized>(source: &S, settings: &EvalSettings, repetitions: usize) -> Result<TimingSummary> {
    if repetitions == 0 {
        return Err(Error::InvalidParams("repetitions must be >= 1".into()));
    }
    settings.params.validate()?;
    let mut jobs = Vec::new();
    for id in source.frame_ids() {
        let frame = source.load(id)?;
        let cloud = match frame.cloud.frame {
            Frame::RectCam => frame.cloud,
            Frame::Lidar => velo_to_rect(&frame.cloud, &frame.calib)?,
        };
        let boxes = frame
            .objects
            .iter()
            .filter(|o| settings.wants(o.class))
            .map(|o| o.box2d)
            .collect();
        jobs.push(Job {
            cloud,
            calib: frame.calib,
            boxes,
        });
    }

    let frustums: usize = jobs.iter().map(|j| j.boxes.len()).sum();
    let mut samples = Vec::with_capacity(frustums * repetitions);
    let (mut points, mut scanned) = (0u64, 0u64);
    for pass in 0..=repetitions {
        let timed = pass > 0;
        for job in &jobs {
            for bbox in &job.boxes {
                let start = Instant::now();
                let out = run_ffs(&job.cloud, bbox, &job.calib, &settings.params)?;
                let elapsed = start.elapsed();
                if timed {
                    samples.push(elapsed.as_secs_f64() * 1e6);
                    points += out.points_before as u64;
                    scanned += job.cloud.len() as u64;
                }
                black_box(out);
            }
        }
    }
    Ok(TimingSummary::from_samples(&samples, repetitions, frustums, points, scanned))
}
