//! Measuring how well the constrained RoI tracks ground truth.
//!
//! The primary error is axial: `|c_pred - c_gt|`, where `c_gt` is the axis
//! coordinate of the volumetric ground-truth center. Lateral placement is
//! fixed by the 2D box, so only the axial component depends on the
//! heuristic. A 3D distance from the RoI midpoint to the center is reported
//! alongside for comparison.

mod bench;
mod dataset;
mod grid;

pub use bench::{bench, TimingSummary};
pub use dataset::{evaluate_dataset, DatasetEvaluation, FrameData, FrameFailure, FrameSource, InMemoryDataset, KittiDataset};
pub use grid::{grid_search, GridCell, GridResult, GridSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffs::{constrain_selection, filter_points, ground_truth_constrain, lift_box, ConstrainedRoI, HeuristicParams};
use crate::frustum::{Frustum, FrustumSelection};
use crate::kitti::{velo_to_rect, CalibrationSet, Difficulty, Frame, GroundTruthObject, ObjectClass, PointCloud};

/// How the RoI center is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Densest smeared slab.
    #[default]
    Ffs,
    /// The ground-truth center's axis coordinate.
    GtCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub params: HeuristicParams,
    pub baseline: Baseline,
    pub classes: Vec<ObjectClass>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            params: HeuristicParams::default(),
            baseline: Baseline::Ffs,
            classes: ObjectClass::ALL.to_vec(),
        }
    }
}

impl EvalSettings {
    pub fn with_params(params: HeuristicParams) -> Self {
        EvalSettings {
            params,
            ..Default::default()
        }
    }

    pub fn wants(&self, class: ObjectClass) -> bool {
        self.classes.contains(&class)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub frame_id: String,
    /// Position of the object in the frame's filtered label list.
    pub object_id: usize,
    pub class: ObjectClass,
    pub difficulty: Option<Difficulty>,
    pub c_pred: f64,
    pub c_gt: f64,
    pub axial_error: f64,
    pub center_error_3d: f64,
    pub near_c: f64,
    pub far_c: f64,
    pub contained: bool,
    pub points_before: usize,
    pub points_after: usize,
    pub fallback: bool,
}

impl EvalRecord {
    pub fn reduction_ratio(&self) -> Option<f64> {
        (self.points_before > 0).then(|| 1.0 - self.points_after as f64 / self.points_before as f64)
    }
}

/// Scores one object given its frustum and the points inside it.
pub fn evaluate_object(
    frame_id: &str,
    object_id: usize,
    gt: &GroundTruthObject,
    frustum: &Frustum,
    selection: &FrustumSelection,
    params: &HeuristicParams,
    baseline: Baseline,
) -> Result<EvalRecord> {
    let (roi, retained, fallback) = match baseline {
        Baseline::Ffs => {
            let out = constrain_selection(frustum, selection, params)?;
            (out.roi, out.retained.len(), out.fallback)
        }
        Baseline::GtCenter => match ground_truth_constrain(gt, frustum, params.roi_length) {
            Ok(roi) => {
                let kept = filter_points(&roi, selection).len();
                (roi, kept, false)
            }
            // Center beyond the far plane or behind the camera.
            Err(Error::InvalidCenter { .. }) => {
                (ConstrainedRoI::unconstrained(frustum), selection.len(), true)
            }
            Err(e) => return Err(e),
        },
    };
    Ok(record_for(frame_id, object_id, gt, &roi, selection.len(), retained, fallback))
}

fn record_for(
    frame_id: &str,
    object_id: usize,
    gt: &GroundTruthObject,
    roi: &ConstrainedRoI,
    points_before: usize,
    points_after: usize,
    fallback: bool,
) -> EvalRecord {
    let c_gt = roi.frustum.axis_coordinate(&gt.center);
    let midpoint = roi.frustum.point_on_axis(0.5 * (roi.near_c + roi.far_c));
    EvalRecord {
        frame_id: frame_id.to_string(),
        object_id,
        class: gt.class,
        difficulty: gt.difficulty(),
        c_pred: roi.c,
        c_gt,
        axial_error: (roi.c - c_gt).abs(),
        center_error_3d: (midpoint - gt.center.coords()).norm(),
        near_c: roi.near_c,
        far_c: roi.far_c,
        contained: roi.contains_axis_coordinate(c_gt),
        points_before,
        points_after,
        fallback,
    }
}

/// One record per ground-truth object of a selected class, using its 2D
/// box as the detection.
pub fn evaluate_frame(
    frame_id: &str,
    cloud: &PointCloud,
    calib: &CalibrationSet,
    objects: &[GroundTruthObject],
    settings: &EvalSettings,
) -> Result<Vec<EvalRecord>> {
    settings.params.validate()?;
    let converted;
    let rect = match cloud.frame {
        Frame::RectCam => cloud,
        Frame::Lidar => {
            converted = velo_to_rect(cloud, calib)?;
            &converted
        }
    };
    objects
        .iter()
        .filter(|gt| settings.wants(gt.class))
        .enumerate()
        .map(|(object_id, gt)| {
            let frustum = lift_box(&gt.box2d, calib, &settings.params)?;
            let selection = frustum.select_points(rect)?;
            evaluate_object(frame_id, object_id, gt, &frustum, &selection, &settings.params, settings.baseline)
        })
        .collect()
}

/// Summary statistics over a group of records. Undefined metrics are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: String,
    pub records: usize,
    pub fallbacks: usize,
    /// Axial RMSE over non-fallback records.
    pub rmse: Option<f64>,
    pub rmse_3d: Option<f64>,
    /// Over all records, fallbacks included.
    pub containment_rate: Option<f64>,
    pub containment_rate_non_fallback: Option<f64>,
    /// Mean of `1 - points_after / points_before` where `points_before > 0`.
    pub mean_reduction_ratio: Option<f64>,
}

fn root_mean_square(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v * v;
        n += 1;
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

impl GroupMetrics {
    pub fn from_records<'a>(group: impl Into<String>, records: impl IntoIterator<Item = &'a EvalRecord>) -> Self {
        let records: Vec<&EvalRecord> = records.into_iter().collect();
        let scored = || records.iter().filter(|r| !r.fallback);
        let fraction = |hits: usize, n: usize| (n > 0).then(|| hits as f64 / n as f64);
        GroupMetrics {
            group: group.into(),
            records: records.len(),
            fallbacks: records.iter().filter(|r| r.fallback).count(),
            rmse: root_mean_square(scored().map(|r| r.axial_error)),
            rmse_3d: root_mean_square(scored().map(|r| r.center_error_3d)),
            containment_rate: fraction(records.iter().filter(|r| r.contained).count(), records.len()),
            containment_rate_non_fallback: fraction(scored().filter(|r| r.contained).count(), scored().count()),
            mean_reduction_ratio: mean(records.iter().filter_map(|r| r.reduction_ratio())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: GroupMetrics,
    pub per_class: Vec<GroupMetrics>,
    /// Pedestrian and Cyclist pooled into a single group.
    pub pedestrian_cyclist: GroupMetrics,
    /// Cumulative KITTI levels per class: "Car/Moderate" includes Easy.
    pub per_difficulty: Vec<GroupMetrics>,
    pub note: String,
}

pub const RMSE_NOTE: &str =
    "RMSE depends only on the peak distance c, not on roi_length; fallback records are excluded from RMSE";

impl EvalReport {
    pub fn class(&self, class: ObjectClass) -> &GroupMetrics {
        self.per_class
            .iter()
            .find(|g| g.group == class.as_str())
            .expect("every class has a group")
    }
}

/// Folds records, in order, into per-class and pooled metrics.
pub fn aggregate(records: &[EvalRecord]) -> EvalReport {
    let per_class = ObjectClass::ALL
        .iter()
        .map(|&c| GroupMetrics::from_records(c.as_str(), records.iter().filter(|r| r.class == c)))
        .collect();
    let pedestrian_cyclist = GroupMetrics::from_records(
        "Pedestrian+Cyclist",
        records
            .iter()
            .filter(|r| matches!(r.class, ObjectClass::Pedestrian | ObjectClass::Cyclist)),
    );
    let mut per_difficulty = Vec::new();
    for &class in &ObjectClass::ALL {
        for level in Difficulty::ALL {
            per_difficulty.push(GroupMetrics::from_records(
                format!("{class}/{level:?}"),
                records
                    .iter()
                    .filter(|r| r.class == class && r.difficulty.is_some_and(|d| d <= level)),
            ));
        }
    }
    EvalReport {
        overall: GroupMetrics::from_records("all", records),
        per_class,
        pedestrian_cyclist,
        per_difficulty,
        note: RMSE_NOTE.to_string(),
    }
}
