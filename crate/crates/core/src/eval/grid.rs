use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::dataset::map_frames;
use super::{aggregate, evaluate_object, Baseline, EvalRecord, EvalReport, FrameFailure, FrameSource};
use crate::error::{Error, Result};
use crate::ffs::{lift_box, HeuristicParams};
use crate::kitti::{velo_to_rect, Frame, ObjectClass};

/// Axes of a Cartesian parameter sweep. `far_plane` and `box_dilation` are
/// shared by every cell since they fix the frustums themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bin_lengths: Vec<f64>,
    pub neighbor_bins: Vec<usize>,
    pub weights: Vec<f64>,
    pub roi_lengths: Vec<f64>,
    pub far_plane: f64,
    pub box_dilation: f64,
}

impl GridSpec {
    /// A one-cell grid at `params`.
    pub fn single(params: &HeuristicParams) -> Self {
        GridSpec {
            bin_lengths: vec![params.bin_length],
            neighbor_bins: vec![params.neighbor_bins],
            weights: vec![params.weight],
            roi_lengths: vec![params.roi_length],
            far_plane: params.far_plane,
            box_dilation: params.box_dilation,
        }
    }

    pub fn len(&self) -> usize {
        self.bin_lengths.len() * self.neighbor_bins.len() * self.weights.len() * self.roi_lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every cell, in lexicographic axis order.
    pub fn cells(&self) -> Vec<HeuristicParams> {
        let mut cells = Vec::with_capacity(self.len());
        for &bin_length in &self.bin_lengths {
            for &neighbor_bins in &self.neighbor_bins {
                for &weight in &self.weights {
                    for &roi_length in &self.roi_lengths {
                        cells.push(HeuristicParams {
                            bin_length,
                            neighbor_bins,
                            weight,
                            roi_length,
                            far_plane: self.far_plane,
                            box_dilation: self.box_dilation,
                        });
                    }
                }
            }
        }
        cells
    }

    fn frustum_params(&self) -> HeuristicParams {
        HeuristicParams {
            far_plane: self.far_plane,
            box_dilation: self.box_dilation,
            ..HeuristicParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub params: HeuristicParams,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

impl GridCell {
    pub fn rmse(&self) -> Option<f64> {
        self.report.as_ref().and_then(|r| r.overall.rmse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub frames: usize,
    pub failures: Vec<FrameFailure>,
    /// Sorted by overall RMSE ascending; undefined RMSE last.
    pub cells: Vec<GridCell>,
}

fn lexicographic(a: &HeuristicParams, b: &HeuristicParams) -> Ordering {
    a.bin_length
        .total_cmp(&b.bin_length)
        .then(a.neighbor_bins.cmp(&b.neighbor_bins))
        .then(a.weight.total_cmp(&b.weight))
        .then(a.roi_length.total_cmp(&b.roi_length))
}

fn by_rmse(a: &GridCell, b: &GridCell) -> Ordering {
    match (a.rmse(), b.rmse()) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| lexicographic(&a.params, &b.params))
}

type CellRecords = Vec<std::result::Result<Vec<EvalRecord>, String>>;

/// Evaluates every cell of `grid`. Each frame is loaded and each frustum is
/// populated once; the cells then share those selections. Failing cells are
/// reported in place without stopping the sweep.
pub fn grid_search<S: FrameSource + ?Sized>(
    source: &S,
    grid: &GridSpec,
    baseline: Baseline,
    classes: &[ObjectClass],
    parallelism: usize,
) -> Result<GridResult> {
    let frustum_params = grid.frustum_params();
    if !(frustum_params.far_plane > 0.0 && frustum_params.far_plane.is_finite()) {
        return Err(Error::InvalidParams(format!("far_plane must be > 0, got {}", grid.far_plane)));
    }
    let cells = grid.cells();
    let validity: Vec<Option<String>> = cells.iter().map(|p| p.validate().err().map(|e| e.to_string())).collect();

    let per_frame = map_frames(source, parallelism, |id| -> Result<CellRecords> {
        let frame = source.load(id)?;
        let rect = match frame.cloud.frame {
            Frame::RectCam => frame.cloud,
            Frame::Lidar => velo_to_rect(&frame.cloud, &frame.calib)?,
        };
        let mut prepared = Vec::new();
        for (object_id, gt) in frame.objects.iter().filter(|o| classes.contains(&o.class)).enumerate() {
            let frustum = lift_box(&gt.box2d, &frame.calib, &frustum_params)?;
            let selection = frustum.select_points(&rect)?;
            prepared.push((object_id, gt, frustum, selection));
        }
        Ok(cells
            .iter()
            .zip(&validity)
            .map(|(params, invalid)| {
                if let Some(msg) = invalid {
                    return Err(msg.clone());
                }
                prepared
                    .iter()
                    .map(|(object_id, gt, frustum, selection)| {
                        evaluate_object(id, *object_id, gt, frustum, selection, params, baseline)
                            .map_err(|e| format!("frame {id}: {e}"))
                    })
                    .collect()
            })
            .collect())
    })?;

    let mut failures = Vec::new();
    let mut records: Vec<std::result::Result<Vec<EvalRecord>, String>> = vec![Ok(Vec::new()); cells.len()];
    let frames = per_frame.len();
    for (frame_id, result) in per_frame {
        match result {
            Ok(per_cell) => {
                for (acc, cell) in records.iter_mut().zip(per_cell) {
                    match (acc.as_mut(), cell) {
                        (Ok(all), Ok(recs)) => all.extend(recs),
                        (Ok(_), Err(msg)) => *acc = Err(msg),
                        (Err(_), _) => {}
                    }
                }
            }
            Err(e) => failures.push(FrameFailure {
                frame_id,
                error: e.to_string(),
            }),
        }
    }

    let mut out: Vec<GridCell> = cells
        .into_iter()
        .zip(records)
        .map(|(params, recs)| match recs {
            Ok(recs) => GridCell {
                params,
                report: Some(aggregate(&recs)),
                error: None,
            },
            Err(msg) => GridCell {
                params,
                report: None,
                error: Some(msg),
            },
        })
        .collect();
    out.sort_by(by_rmse);
    Ok(GridResult {
        frames,
        failures,
        cells: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_sweep_has_440_cells() {
        let grid = GridSpec {
            bin_lengths: (1..=40).map(|i| i as f64 * 0.05).collect(),
            neighbor_bins: (0..=10).collect(),
            weights: vec![1.0],
            roi_lengths: vec![30.0],
            far_plane: 70.0,
            box_dilation: 0.0,
        };
        assert_eq!(grid.len(), 440);
        let cells = grid.cells();
        assert_eq!(cells.len(), 440);
        assert_eq!((cells[0].bin_length, cells[0].neighbor_bins), (0.05, 0));
        assert_eq!(cells[1].neighbor_bins, 1);
    }

    #[test]
    fn undefined_rmse_sorts_last() {
        let cell = |bin_length: f64, report: Option<EvalReport>| GridCell {
            params: HeuristicParams { bin_length, ..Default::default() },
            report,
            error: None,
        };
        let mut good = aggregate(&[]);
        good.overall.rmse = Some(1.0);
        let mut cells = [cell(0.5, None), cell(0.9, Some(good.clone())), cell(0.1, Some(good))];
        cells.sort_by(by_rmse);
        let order: Vec<f64> = cells.iter().map(|c| c.params.bin_length).collect();
        assert_eq!(order, vec![0.1, 0.9, 0.5]);
    }
}
