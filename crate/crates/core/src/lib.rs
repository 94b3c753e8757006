//! Density-driven frustum RoI constraining for camera/LiDAR fusion.
//!
//! Given a LiDAR scan, KITTI calibration and a 2D object box, the box is
//! lifted to a 3D frustum, the frustum axis is binned, point counts are
//! smeared to neighboring bins, and the region of interest is cut down to a
//! window of length `h` centered on the heaviest bin. The [`eval`] module
//! scores that window against ground truth.
//!
//! ```no_run
//! use frustum_ffs::prelude::*;
//!
//! # fn main() -> frustum_ffs::Result<()> {
//! let calib = load_calibration("kitti/calib/000008.txt")?;
//! let cloud = velo_to_rect(&load_point_cloud("kitti/velodyne/000008.bin")?, &calib)?;
//! let bbox = Box2D::new(599.4, 156.4, 629.75, 189.25, ObjectClass::Car)?;
//! let out = run_ffs(&cloud, &bbox, &calib, &HeuristicParams::default())?;
//! println!("c = {:.2} m, kept {}/{} points", out.roi.c, out.retained.len(), out.points_before);
//! # Ok(())
//! # }
//! ```
//!
//! Runnable programs for each capability live in `examples/`.

// Validation negates comparisons so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod eval;
pub mod ffs;
pub mod frustum;
pub mod kitti;
pub mod synth;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::eval::{aggregate, evaluate_frame, Baseline, EvalReport, EvalSettings};
    pub use crate::ffs::{
        build_histogram, constrain_roi, filter_points, ground_truth_constrain, peak_bin, run_ffs, smear_weights,
        ConstrainedRoI, HeuristicParams,
    };
    pub use crate::frustum::{build_frustum, Frustum, FrustumSelection};
    pub use crate::kitti::{
        load_calibration, load_labels, load_point_cloud, velo_to_rect, Box2D, CalibrationSet, Frame, ObjectClass,
        Point3, PointCloud,
    };
}
