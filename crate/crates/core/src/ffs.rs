//! Frustum-density search-space reduction.
//!
//! The frustum axis is cut into slabs of `bin_length`. Each point adds 1 to
//! its own slab and `weight` to every slab within `neighbor_bins` on either
//! side. The slab with the largest total gives the object distance `c`, and
//! the region of interest is cut down to `[c - h/2, c + h/2]` along the axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frustum::{build_frustum, Frustum, FrustumSelection};
use crate::kitti::{Box2D, CalibrationSet, GroundTruthObject, PointCloud};

pub const DEFAULT_BIN_LENGTH: f64 = 0.75;
pub const DEFAULT_NEIGHBOR_BINS: usize = 7;
pub const DEFAULT_WEIGHT: f64 = 1.0;
pub const DEFAULT_ROI_LENGTH: f64 = 30.0;
pub const DEFAULT_FAR_PLANE: f64 = 70.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    /// Slab thickness along the frustum axis, meters.
    pub bin_length: f64,
    /// Smearing radius in slabs.
    pub neighbor_bins: usize,
    /// Contribution of a point to each neighboring slab.
    pub weight: f64,
    /// Length `h` of the constrained region, meters.
    pub roi_length: f64,
    pub far_plane: f64,
    /// Pixels added to every side of the 2D box before lifting.
    pub box_dilation: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams {
            bin_length: DEFAULT_BIN_LENGTH,
            neighbor_bins: DEFAULT_NEIGHBOR_BINS,
            weight: DEFAULT_WEIGHT,
            roi_length: DEFAULT_ROI_LENGTH,
            far_plane: DEFAULT_FAR_PLANE,
            box_dilation: 0.0,
        }
    }
}

impl HeuristicParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.bin_length > 0.0 && self.bin_length.is_finite(), "bin_length must be > 0"),
            (self.roi_length > 0.0 && self.roi_length.is_finite(), "roi_length must be > 0"),
            (self.far_plane > 0.0 && self.far_plane.is_finite(), "far_plane must be > 0"),
            (self.weight >= 0.0 && self.weight.is_finite(), "weight must be >= 0"),
            (self.box_dilation.is_finite(), "box_dilation must be finite"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidParams(format!("{msg} ({self:?})")));
            }
        }
        Ok(())
    }
}

/// Per-slab point counts and smeared weights along one frustum axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BinHistogram {
    near: f64,
    far: f64,
    bin_length: f64,
    counts: Vec<u64>,
    weights: Vec<f64>,
    smeared: bool,
}

/// Number of slabs covering `[near, far]`; the last one may be partial.
pub fn num_bins(near: f64, far: f64, bin_length: f64) -> usize {
    (((far - near) / bin_length).ceil() as usize).max(1)
}

impl BinHistogram {
    pub fn near(&self) -> f64 {
        self.near
    }

    pub fn far(&self) -> f64 {
        self.far
    }

    pub fn bin_length(&self) -> f64 {
        self.bin_length
    }

    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_smeared(&self) -> bool {
        self.smeared
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Slab index for axis coordinate `t`; `t == far` lands in the last slab.
    #[inline]
    pub fn bin_of(&self, t: f64) -> usize {
        let idx = ((t - self.near) / self.bin_length).floor();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(self.counts.len() - 1)
        }
    }

    /// Center of slab `idx`. The final slab is clipped at `far`, so its
    /// center is the midpoint of the clipped extent.
    pub fn bin_center(&self, idx: usize) -> f64 {
        let lo = self.near + idx as f64 * self.bin_length;
        let hi = (lo + self.bin_length).min(self.far);
        if idx + 1 == self.counts.len() {
            0.5 * (lo + hi)
        } else {
            self.near + (idx as f64 + 0.5) * self.bin_length
        }
    }
}

/// Counts points per slab. Weights start equal to the counts.
pub fn build_histogram(
    selection: &FrustumSelection,
    frustum: &Frustum,
    params: &HeuristicParams,
) -> Result<BinHistogram> {
    params.validate()?;
    let n = num_bins(frustum.near(), frustum.far(), params.bin_length);
    let mut hist = BinHistogram {
        near: frustum.near(),
        far: frustum.far(),
        bin_length: params.bin_length,
        counts: vec![0; n],
        weights: Vec::new(),
        smeared: false,
    };
    for &t in &selection.axis_coords {
        let b = hist.bin_of(t);
        hist.counts[b] += 1;
    }
    hist.weights = hist.counts.iter().map(|&c| c as f64).collect();
    Ok(hist)
}

/// Adds `weight` times the point count of every slab within
/// `neighbor_bins` to each slab. Slabs past either end neither give nor
/// receive.
///
/// Neighbor totals are integer window sums, so the result is exactly
/// `counts[i] + weight * (window_sum - counts[i])`.
pub fn smear_weights(mut hist: BinHistogram, params: &HeuristicParams) -> Result<BinHistogram> {
    if hist.smeared {
        return Err(Error::SmearTwice);
    }
    params.validate()?;
    let n = hist.counts.len();
    let k = params.neighbor_bins;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u64);
    let mut acc = 0u64;
    for &c in &hist.counts {
        acc += c;
        prefix.push(acc);
    }
    for i in 0..n {
        let lo = i.saturating_sub(k);
        let hi = (i + k).min(n - 1);
        let neighbors = prefix[hi + 1] - prefix[lo] - hist.counts[i];
        hist.weights[i] = hist.counts[i] as f64 + params.weight * neighbors as f64;
    }
    hist.smeared = true;
    Ok(hist)
}

/// The heaviest slab (lowest index on ties) and its center distance `c`.
pub fn peak_bin(hist: &BinHistogram) -> Result<(usize, f64)> {
    if !hist.smeared {
        return Err(Error::NotSmeared);
    }
    if hist.total_count() == 0 {
        return Err(Error::EmptyFrustum);
    }
    let mut best = 0;
    for (i, &w) in hist.weights.iter().enumerate().skip(1) {
        if w > hist.weights[best] {
            best = i;
        }
    }
    Ok((best, hist.bin_center(best)))
}

/// A frustum cut down to `[near_c, far_c]` along its axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedRoI {
    pub frustum: Frustum,
    pub c: f64,
    pub near_c: f64,
    pub far_c: f64,
    pub roi_length: f64,
}

impl ConstrainedRoI {
    pub fn length(&self) -> f64 {
        self.far_c - self.near_c
    }

    pub fn contains_axis_coordinate(&self, t: f64) -> bool {
        t >= self.near_c && t <= self.far_c
    }

    /// The full frustum, centered at its midpoint.
    pub fn unconstrained(frustum: &Frustum) -> Self {
        ConstrainedRoI {
            frustum: frustum.clone(),
            c: 0.5 * (frustum.near() + frustum.far()),
            near_c: frustum.near(),
            far_c: frustum.far(),
            roi_length: frustum.length(),
        }
    }
}

/// Clamps each end of `[c - h/2, c + h/2]` to the frustum independently.
pub fn constrain_roi(frustum: &Frustum, c: f64, roi_length: f64) -> Result<ConstrainedRoI> {
    if !(roi_length > 0.0 && roi_length.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "roi_length must be > 0, got {roi_length}"
        )));
    }
    if !(c >= frustum.near() && c <= frustum.far()) {
        return Err(Error::InvalidCenter {
            c,
            near: frustum.near(),
            far: frustum.far(),
        });
    }
    let half = 0.5 * roi_length;
    Ok(ConstrainedRoI {
        frustum: frustum.clone(),
        c,
        near_c: (c - half).max(frustum.near()),
        far_c: (c + half).min(frustum.far()),
        roi_length,
    })
}

/// Keeps the entries whose axis coordinate lies in the constrained range.
pub fn filter_points(roi: &ConstrainedRoI, selection: &FrustumSelection) -> FrustumSelection {
    let mut out = FrustumSelection::default();
    for (i, t) in selection.iter() {
        if roi.contains_axis_coordinate(t) {
            out.indices.push(i);
            out.axis_coords.push(t);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct FfsOutcome {
    pub roi: ConstrainedRoI,
    /// Frustum points that survive the constraint.
    pub retained: FrustumSelection,
    /// Number of points in the full frustum.
    pub points_before: usize,
    /// Set when the frustum was empty and the full RoI was returned.
    pub fallback: bool,
}

/// Runs histogram, smearing, peak search and constraining on an existing
/// frustum selection.
pub fn constrain_selection(
    frustum: &Frustum,
    selection: &FrustumSelection,
    params: &HeuristicParams,
) -> Result<FfsOutcome> {
    let hist = build_histogram(selection, frustum, params)?;
    let hist = smear_weights(hist, params)?;
    let (roi, fallback) = match peak_bin(&hist) {
        Ok((_, c)) => (constrain_roi(frustum, c, params.roi_length)?, false),
        Err(Error::EmptyFrustum) => (ConstrainedRoI::unconstrained(frustum), true),
        Err(e) => return Err(e),
    };
    let retained = filter_points(&roi, selection);
    Ok(FfsOutcome {
        roi,
        retained,
        points_before: selection.len(),
        fallback,
    })
}

/// End-to-end: lift the box, collect frustum points, and constrain the RoI
/// around the densest slab.
pub fn run_ffs(
    cloud: &PointCloud,
    bbox: &Box2D,
    calib: &CalibrationSet,
    params: &HeuristicParams,
) -> Result<FfsOutcome> {
    params.validate()?;
    let frustum = lift_box(bbox, calib, params)?;
    let selection = frustum.select_points(cloud)?;
    constrain_selection(&frustum, &selection, params)
}

/// Builds the frustum for `bbox`, applying the configured box dilation.
pub fn lift_box(bbox: &Box2D, calib: &CalibrationSet, params: &HeuristicParams) -> Result<Frustum> {
    let bbox = if params.box_dilation != 0.0 {
        bbox.dilate(params.box_dilation)
    } else {
        *bbox
    };
    build_frustum(&bbox, calib, params.far_plane)
}

/// Constrains the RoI around the ground-truth center's axis coordinate.
pub fn ground_truth_constrain(
    gt: &GroundTruthObject,
    frustum: &Frustum,
    roi_length: f64,
) -> Result<ConstrainedRoI> {
    let c = frustum.axis_coordinate(&gt.center);
    constrain_roi(frustum, c, roi_length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kitti::{Frame, ObjectClass, Point3};
    use nalgebra::Vector3;

    fn frustum(far: f64) -> Frustum {
        let b = Box2D::new(-1.0, -1.0, 1.0, 1.0, ObjectClass::Car).unwrap();
        build_frustum(&b, &CalibrationSet::identity(), far).unwrap()
    }

    fn params(bin_length: f64, neighbor_bins: usize, weight: f64) -> HeuristicParams {
        HeuristicParams {
            bin_length,
            neighbor_bins,
            weight,
            ..HeuristicParams::default()
        }
    }

    fn hist_from_counts(counts: &[u64], bin_length: f64) -> BinHistogram {
        BinHistogram {
            near: 0.0,
            far: bin_length * counts.len() as f64,
            bin_length,
            counts: counts.to_vec(),
            weights: counts.iter().map(|&c| c as f64).collect(),
            smeared: false,
        }
    }

    #[test]
    fn default_geometry_has_94_bins() {
        let h = build_histogram(&FrustumSelection::default(), &frustum(70.0), &HeuristicParams::default()).unwrap();
        assert_eq!(h.num_bins(), 94);
        assert!(h.counts().iter().all(|&c| c == 0));
    }

    #[test]
    fn lower_boundary_lands_in_first_bin() {
        let sel = FrustumSelection::from_axis_coords(vec![0.0]);
        let h = build_histogram(&sel, &frustum(70.0), &HeuristicParams::default()).unwrap();
        assert_eq!(h.counts()[0], 1);
        assert_eq!(h.total_count(), 1);
    }

    #[test]
    fn floor_division_binning() {
        let sel = FrustumSelection::from_axis_coords(vec![0.1, 0.8, 0.76]);
        let h = build_histogram(&sel, &frustum(70.0), &params(0.75, 7, 1.0)).unwrap();
        assert_eq!(&h.counts()[..3], &[1, 2, 0]);
        assert_eq!(h.weights()[1], 2.0);
    }

    #[test]
    fn far_boundary_lands_in_last_bin() {
        let sel = FrustumSelection::from_axis_coords(vec![70.0, 69.9]);
        let h = build_histogram(&sel, &frustum(70.0), &params(0.7, 0, 1.0)).unwrap();
        assert_eq!(h.num_bins(), 100);
        assert_eq!(h.counts()[99], 2);
    }

    #[test]
    fn no_smearing_without_neighbors() {
        let h = smear_weights(hist_from_counts(&[3, 0, 5, 1], 1.0), &params(1.0, 0, 1.0)).unwrap();
        assert_eq!(h.weights(), &[3.0, 0.0, 5.0, 1.0]);
        let h = smear_weights(hist_from_counts(&[3, 0, 5, 1], 1.0), &params(1.0, 3, 0.0)).unwrap();
        assert_eq!(h.weights(), &[3.0, 0.0, 5.0, 1.0]);
    }

    #[test]
    fn smearing_box_kernel() {
        let h = smear_weights(hist_from_counts(&[0, 10, 0], 1.0), &params(1.0, 1, 1.0)).unwrap();
        assert_eq!(h.weights(), &[10.0, 10.0, 10.0]);
        let h = smear_weights(hist_from_counts(&[0, 10, 0], 1.0), &params(1.0, 1, 0.5)).unwrap();
        assert_eq!(h.weights(), &[5.0, 10.0, 5.0]);
        assert_eq!(h.counts(), &[0, 10, 0]);
    }

    #[test]
    fn smearing_truncates_at_edges() {
        let h = smear_weights(hist_from_counts(&[4, 0, 0, 0, 2], 1.0), &params(1.0, 2, 1.0)).unwrap();
        assert_eq!(h.weights(), &[4.0, 4.0, 6.0, 2.0, 2.0]);
    }

    #[test]
    fn smearing_twice_is_an_error() {
        let p = params(1.0, 1, 1.0);
        let h = smear_weights(hist_from_counts(&[1, 2], 1.0), &p).unwrap();
        assert!(matches!(smear_weights(h, &p), Err(Error::SmearTwice)));
    }

    #[test]
    fn peak_examples() {
        let mut h = hist_from_counts(&[0, 10, 0], 0.75);
        h = smear_weights(h, &params(0.75, 1, 0.5)).unwrap();
        assert_eq!(h.weights(), &[5.0, 10.0, 5.0]);
        assert_eq!(peak_bin(&h).unwrap(), (1, 1.125));

        let h = smear_weights(hist_from_counts(&[7, 7], 1.0), &params(1.0, 0, 1.0)).unwrap();
        assert_eq!(peak_bin(&h).unwrap().0, 0);

        let h = smear_weights(hist_from_counts(&[0, 0, 0], 1.0), &params(1.0, 1, 1.0)).unwrap();
        assert!(matches!(peak_bin(&h), Err(Error::EmptyFrustum)));

        let h = hist_from_counts(&[1], 1.0);
        assert!(matches!(peak_bin(&h), Err(Error::NotSmeared)));
    }

    #[test]
    fn partial_last_bin_center_stays_inside() {
        let sel = FrustumSelection::from_axis_coords(vec![69.9; 5]);
        let f = frustum(70.0);
        let p = params(0.75, 0, 1.0);
        let h = smear_weights(build_histogram(&sel, &f, &p).unwrap(), &p).unwrap();
        let (idx, c) = peak_bin(&h).unwrap();
        assert_eq!(idx, 93);
        // Slab 93 spans [69.75, 70.5] but is clipped to [69.75, 70].
        assert!((c - 69.875).abs() < 1e-12, "{c}");
        assert!(constrain_roi(&f, c, 30.0).is_ok());
    }

    #[test]
    fn constrain_examples() {
        let f = frustum(70.0);
        let roi = constrain_roi(&f, 35.0, 30.0).unwrap();
        assert_eq!((roi.near_c, roi.far_c), (20.0, 50.0));
        let roi = constrain_roi(&f, 5.0, 30.0).unwrap();
        assert_eq!((roi.near_c, roi.far_c), (0.0, 20.0));
        let roi = constrain_roi(&f, 65.0, 30.0).unwrap();
        assert_eq!((roi.near_c, roi.far_c), (50.0, 70.0));
        assert!(matches!(constrain_roi(&f, 70.5, 30.0), Err(Error::InvalidCenter { .. })));
        assert!(matches!(constrain_roi(&f, -0.1, 30.0), Err(Error::InvalidCenter { .. })));
        assert!(matches!(constrain_roi(&f, 10.0, 0.0), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn filter_examples() {
        let f = frustum(70.0);
        let roi = constrain_roi(&f, 35.0, 30.0).unwrap();
        let sel = FrustumSelection::from_axis_coords(vec![10.0, 35.0, 60.0]);
        let kept = filter_points(&roi, &sel);
        assert_eq!(kept.indices, vec![1]);
        assert_eq!(kept.axis_coords, vec![35.0]);

        let full = ConstrainedRoI::unconstrained(&f);
        assert_eq!(filter_points(&full, &sel), sel);
    }

    #[test]
    fn empty_frustum_falls_back() {
        let f = frustum(70.0);
        let out = constrain_selection(&f, &FrustumSelection::default(), &HeuristicParams::default()).unwrap();
        assert!(out.fallback);
        assert_eq!((out.roi.near_c, out.roi.far_c, out.roi.c), (0.0, 70.0, 35.0));
        assert_eq!(out.points_before, 0);
    }

    #[test]
    fn run_ffs_on_small_scene() {
        let mut points = Vec::new();
        for i in 0..40 {
            points.push(Point3::new(0.01 * i as f64, 0.0, 30.0 + 0.01 * i as f64));
        }
        points.push(Point3::new(0.0, 0.0, 5.0));
        points.push(Point3::new(0.0, 0.0, 90.0));
        let cloud = PointCloud::new(Frame::RectCam, points);
        let b = Box2D::new(-1.0, -1.0, 1.0, 1.0, ObjectClass::Car).unwrap();
        let out = run_ffs(&cloud, &b, &CalibrationSet::identity(), &HeuristicParams::default()).unwrap();
        assert!(!out.fallback);
        assert_eq!(out.points_before, 41);
        // With w = 1 every slab whose window covers slab 40 ties; the
        // nearest of them (33) wins.
        assert!((out.roi.c - 25.125).abs() < 1e-9, "{}", out.roi.c);
        assert_eq!(out.retained.len(), 40);
    }

    #[test]
    fn ground_truth_window() {
        let f = frustum(70.0);
        let gt = |depth: f64| GroundTruthObject {
            class: ObjectClass::Car,
            center: Point3::new(0.0, 0.0, depth),
            height: 1.5,
            width: 1.6,
            length: 3.9,
            yaw: 0.0,
            box2d: Box2D::new(-1.0, -1.0, 1.0, 1.0, ObjectClass::Car).unwrap(),
            truncation: 0.0,
            occlusion: 0,
        };
        let roi = ground_truth_constrain(&gt(30.0), &f, 20.0).unwrap();
        assert_eq!((roi.near_c, roi.far_c), (20.0, 40.0));
        let roi = ground_truth_constrain(&gt(3.0), &f, 10.0).unwrap();
        assert_eq!((roi.near_c, roi.far_c), (0.0, 8.0));
        assert!(ground_truth_constrain(&gt(80.0), &f, 10.0).is_err());
        assert_eq!(f.point_on_axis(1.0), Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn invalid_params_are_rejected() {
        for p in [params(0.0, 7, 1.0), params(0.75, 7, -1.0)] {
            assert!(matches!(p.validate(), Err(Error::InvalidParams(_))));
        }
        let p = HeuristicParams { roi_length: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
