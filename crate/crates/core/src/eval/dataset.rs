use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_frame, EvalRecord, EvalSettings};
use crate::error::{Error, Result};
use crate::kitti::{load_calibration, load_labels, load_point_cloud, CalibrationSet, GroundTruthObject, PointCloud};

/// Everything needed to evaluate one frame.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub id: String,
    pub cloud: PointCloud,
    pub calib: CalibrationSet,
    pub objects: Vec<GroundTruthObject>,
}

/// An ordered collection of frames that are loaded on demand.
pub trait FrameSource: Sync {
    fn frame_ids(&self) -> &[String];
    fn load(&self, id: &str) -> Result<FrameData>;
}

/// `<root>/velodyne/<id>.bin`, `<root>/calib/<id>.txt`, `<root>/label_2/<id>.txt`.
#[derive(Debug, Clone)]
pub struct KittiDataset {
    root: PathBuf,
    ids: Vec<String>,
}

const SUBDIRS: [&str; 3] = ["velodyne", "calib", "label_2"];

impl KittiDataset {
    /// Opens `root`. Frame ids come from `split` (one per line) when given,
    /// otherwise from the sorted stems of `velodyne/*.bin`.
    pub fn open(root: impl Into<PathBuf>, split: Option<&Path>) -> Result<Self> {
        let root = root.into();
        for sub in SUBDIRS {
            let dir = root.join(sub);
            if !dir.is_dir() {
                return Err(Error::Validation(format!("missing directory {}", dir.display())));
            }
        }
        let ids = match split {
            Some(path) => read_split(path)?,
            None => {
                let dir = root.join("velodyne");
                let mut ids = Vec::new();
                for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                    let path = entry.map_err(|e| Error::io(&dir, e))?.path();
                    if path.extension().is_some_and(|e| e == "bin") {
                        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                            ids.push(stem.to_string());
                        }
                    }
                }
                ids.sort();
                ids
            }
        };
        Ok(KittiDataset { root, ids })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn velodyne_path(&self, id: &str) -> PathBuf {
        self.root.join("velodyne").join(format!("{id}.bin"))
    }

    pub fn calib_path(&self, id: &str) -> PathBuf {
        self.root.join("calib").join(format!("{id}.txt"))
    }

    pub fn label_path(&self, id: &str) -> PathBuf {
        self.root.join("label_2").join(format!("{id}.txt"))
    }
}

/// Reads newline-separated frame ids, ignoring blank lines.
pub fn read_split(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

impl FrameSource for KittiDataset {
    fn frame_ids(&self) -> &[String] {
        &self.ids
    }

    fn load(&self, id: &str) -> Result<FrameData> {
        Ok(FrameData {
            id: id.to_string(),
            cloud: load_point_cloud(self.velodyne_path(id))?,
            calib: load_calibration(self.calib_path(id))?,
            objects: load_labels(self.label_path(id))?,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct InMemoryDataset {
    ids: Vec<String>,
    frames: Vec<FrameData>,
}

impl InMemoryDataset {
    pub fn new(frames: Vec<FrameData>) -> Self {
        InMemoryDataset {
            ids: frames.iter().map(|f| f.id.clone()).collect(),
            frames,
        }
    }

    pub fn frames(&self) -> &[FrameData] {
        &self.frames
    }
}

impl FrameSource for InMemoryDataset {
    fn frame_ids(&self) -> &[String] {
        &self.ids
    }

    fn load(&self, id: &str) -> Result<FrameData> {
        self.frames
            .iter()
            .find(|f| f.id == id)
            .cloned()
            .ok_or_else(|| Error::Validation(format!("unknown frame id {id:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFailure {
    pub frame_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEvaluation {
    pub frames: usize,
    pub failures: Vec<FrameFailure>,
    pub records: Vec<EvalRecord>,
}

impl DatasetEvaluation {
    pub fn all_failed(&self) -> bool {
        self.frames > 0 && self.failures.len() == self.frames
    }
}

/// Runs `f` over every frame id on `parallelism` workers and returns the
/// results in frame order.
pub(crate) fn map_frames<S, T, F>(source: &S, parallelism: usize, f: F) -> Result<Vec<(String, T)>>
where
    S: FrameSource + ?Sized,
    T: Send,
    F: Fn(&str) -> T + Sync,
{
    let ids = source.frame_ids();
    if parallelism <= 1 {
        return Ok(ids.iter().map(|id| (id.clone(), f(id))).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| ids.par_iter().map(|id| (id.clone(), f(id))).collect()))
}

/// Evaluates every frame; per-frame errors are collected rather than
/// aborting the run. Records are ordered by frame regardless of
/// `parallelism`.
pub fn evaluate_dataset<S: FrameSource + ?Sized>(
    source: &S,
    settings: &EvalSettings,
    parallelism: usize,
) -> Result<DatasetEvaluation> {
    settings.params.validate()?;
    let results = map_frames(source, parallelism, |id| {
        let frame = source.load(id)?;
        evaluate_frame(id, &frame.cloud, &frame.calib, &frame.objects, settings)
    })?;
    let mut out = DatasetEvaluation {
        frames: results.len(),
        failures: Vec::new(),
        records: Vec::new(),
    };
    for (frame_id, result) in results {
        match result {
            Ok(records) => out.records.extend(records),
            Err(e) => out.failures.push(FrameFailure {
                frame_id,
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}
