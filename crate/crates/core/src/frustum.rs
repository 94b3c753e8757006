//! Lifting image boxes to 3D frustums in the rectified camera frame.
//!
//! A frustum is the intersection of four closed half-spaces through the
//! camera center with the slab `near <= (p - origin) . axis <= far`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::kitti::{Box2D, CalibrationSet, Frame, Point3, PointCloud};

/// Back-projection of image pixels through `P2`.
///
/// `P2 = [M | p4]`; the camera center is `-M⁻¹ p4` and pixel `(u, v)` maps to
/// the ray direction `M⁻¹ [u, v, 1]ᵀ`.
#[derive(Debug, Clone)]
pub struct CameraRays {
    inv: Matrix3<f64>,
    center: Vector3<f64>,
}

impl CameraRays {
    pub fn from_calibration(calib: &CalibrationSet) -> Result<Self> {
        let m: Matrix3<f64> = calib.p2.fixed_view::<3, 3>(0, 0).into_owned();
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::Validation("P2 has a singular 3x3 block".into()))?;
        let center = -(inv * calib.p2.column(3));
        Ok(CameraRays { inv, center })
    }

    /// Camera optical center in the rectified frame.
    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    /// Unnormalized ray direction through pixel `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        self.inv * Vector3::new(u, v, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frustum {
    origin: Vector3<f64>,
    axis: Vector3<f64>,
    side_planes: [Vector3<f64>; 4],
    near: f64,
    far: f64,
}

const UNIT_TOLERANCE: f64 = 1e-9;

impl Frustum {
    /// Assembles a frustum from already-oriented parts, checking every
    /// invariant.
    pub fn new(
        origin: Vector3<f64>,
        axis: Vector3<f64>,
        side_planes: [Vector3<f64>; 4],
        near: f64,
        far: f64,
    ) -> Result<Self> {
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("frustum origin must be finite".into()));
        }
        if !((axis.norm() - 1.0).abs() <= UNIT_TOLERANCE) || !(axis.z > 0.0) {
            return Err(Error::Validation(format!(
                "frustum axis {:?} must be a forward-pointing unit vector",
                axis.as_slice()
            )));
        }
        for n in &side_planes {
            if !((n.norm() - 1.0).abs() <= UNIT_TOLERANCE) {
                return Err(Error::Validation(format!(
                    "side-plane normal {:?} is not unit length",
                    n.as_slice()
                )));
            }
        }
        if !(near >= 0.0 && near < far && far.is_finite()) {
            return Err(Error::Validation(format!(
                "frustum range [{near}, {far}] must satisfy 0 <= near < far"
            )));
        }
        Ok(Frustum {
            origin,
            axis,
            side_planes,
            near,
            far,
        })
    }

    /// Builds the side planes from four corner rays given in cyclic order.
    /// Each plane contains the origin and two adjacent rays; normals are
    /// flipped to face the axis.
    pub fn from_corner_rays(
        origin: Vector3<f64>,
        axis: Vector3<f64>,
        corner_rays: [Vector3<f64>; 4],
        near: f64,
        far: f64,
    ) -> Result<Self> {
        let mut planes = [Vector3::zeros(); 4];
        for i in 0..4 {
            let a = corner_rays[i];
            let b = corner_rays[(i + 1) % 4];
            let n = a.cross(&b);
            let scale = a.norm() * b.norm();
            let facing = n.dot(&axis);
            if !(n.norm() > 1e-12 * scale) || !(facing.abs() > 1e-12 * scale) {
                return Err(Error::DegenerateBox(format!(
                    "corner rays {i} and {} do not span a plane around the axis",
                    (i + 1) % 4
                )));
            }
            let n = if facing < 0.0 { -n } else { n };
            planes[i] = n.normalize();
        }
        Frustum::new(origin, axis, planes, near, far)
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    /// Inward normals, in the order top, right, bottom, left for frustums
    /// built from a [`Box2D`].
    pub fn side_planes(&self) -> &[Vector3<f64>; 4] {
        &self.side_planes
    }

    pub fn near(&self) -> f64 {
        self.near
    }

    pub fn far(&self) -> f64 {
        self.far
    }

    pub fn length(&self) -> f64 {
        self.far - self.near
    }

    /// Signed distance of `p` along the axis; negative behind the camera.
    #[inline]
    pub fn axis_coordinate(&self, p: &Point3) -> f64 {
        let d = Vector3::new(p.x - self.origin.x, p.y - self.origin.y, p.z - self.origin.z);
        d.dot(&self.axis)
    }

    /// The point at axis coordinate `t`.
    pub fn point_on_axis(&self, t: f64) -> Vector3<f64> {
        self.origin + self.axis * t
    }

    /// Closed membership test. Returns the axis coordinate when inside.
    #[inline]
    pub fn locate(&self, p: &Point3) -> Option<f64> {
        let d = Vector3::new(p.x - self.origin.x, p.y - self.origin.y, p.z - self.origin.z);
        let t = d.dot(&self.axis);
        if !(t >= self.near && t <= self.far) {
            return None;
        }
        if self.side_planes.iter().all(|n| d.dot(n) >= 0.0) {
            Some(t)
        } else {
            None
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.locate(p).is_some()
    }

    /// Indices (in cloud order) and axis coordinates of every point inside.
    pub fn select_points(&self, cloud: &PointCloud) -> Result<FrustumSelection> {
        cloud.expect_frame(Frame::RectCam)?;
        let mut sel = FrustumSelection::default();
        for (i, p) in cloud.points.iter().enumerate() {
            if let Some(t) = self.locate(p) {
                sel.indices.push(i);
                sel.axis_coords.push(t);
            }
        }
        Ok(sel)
    }
}

/// Lifts a 2D box to a frustum reaching `far_plane` meters along its axis.
pub fn build_frustum(bbox: &Box2D, calib: &CalibrationSet, far_plane: f64) -> Result<Frustum> {
    bbox.validate()?;
    if !(far_plane > 0.0 && far_plane.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "far plane must be positive, got {far_plane}"
        )));
    }
    let rays = CameraRays::from_calibration(calib)?;
    let (cu, cv) = bbox.center();
    let axis = rays.ray(cu, cv);
    if !(axis.z > 0.0) {
        return Err(Error::Validation(
            "box center back-projects behind the camera".into(),
        ));
    }
    let corners = bbox.corners().map(|(u, v)| rays.ray(u, v));
    Frustum::from_corner_rays(rays.center(), axis.normalize(), corners, 0.0, far_plane)
}

/// Points of one frustum: source indices with their axis coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrustumSelection {
    pub indices: Vec<usize>,
    pub axis_coords: Vec<f64>,
}

impl FrustumSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.axis_coords.iter().copied())
    }

    /// Builds a selection directly from axis coordinates, indexing them
    /// `0..n`. Mostly useful for synthetic studies of the histogram.
    pub fn from_axis_coords(axis_coords: Vec<f64>) -> Self {
        FrustumSelection {
            indices: (0..axis_coords.len()).collect(),
            axis_coords,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kitti::ObjectClass;

    fn unit_box() -> Box2D {
        Box2D::new(-1.0, -1.0, 1.0, 1.0, ObjectClass::Car).unwrap()
    }

    fn unit_frustum() -> Frustum {
        build_frustum(&unit_box(), &CalibrationSet::identity(), 70.0).unwrap()
    }

    fn rect(points: &[(f64, f64, f64)]) -> PointCloud {
        PointCloud::new(
            Frame::RectCam,
            points.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect(),
        )
    }

    #[test]
    fn centered_box_has_optical_axis() {
        let b = Box2D::new(-0.5, -0.25, 0.5, 0.25, ObjectClass::Car).unwrap();
        let f = build_frustum(&b, &CalibrationSet::identity(), 70.0).unwrap();
        assert_eq!(f.axis(), Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(f.origin(), Vector3::zeros());
        assert_eq!((f.near(), f.far()), (0.0, 70.0));
    }

    #[test]
    fn side_planes_at_45_degrees() {
        let f = unit_frustum();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Left plane: cross((-1,-1,1), (-1,1,1)) = (-2,0,-2), flipped inward.
        let left = f.side_planes()[3];
        assert!((left - Vector3::new(s, 0.0, s)).norm() < 1e-12, "{left:?}");
        let right = f.side_planes()[1];
        assert!((right - Vector3::new(-s, 0.0, s)).norm() < 1e-12, "{right:?}");
        let top = f.side_planes()[0];
        assert!((top - Vector3::new(0.0, s, s)).norm() < 1e-12, "{top:?}");
    }

    #[test]
    fn far_plane_is_kept() {
        assert_eq!(unit_frustum().far(), 70.0);
    }

    #[test]
    fn translation_column_shifts_origin() {
        let mut calib = CalibrationSet::identity();
        calib.p2[(0, 0)] = 700.0;
        calib.p2[(1, 1)] = 700.0;
        calib.p2[(0, 3)] = 700.0 * 0.06;
        let b = Box2D::new(-10.0, -10.0, 10.0, 10.0, ObjectClass::Car).unwrap();
        let f = build_frustum(&b, &calib, 70.0).unwrap();
        assert!((f.origin() - Vector3::new(-0.06, 0.0, 0.0)).norm() < 1e-12);
        // A point on the shifted axis is inside and projects to the box center.
        let p = f.point_on_axis(20.0);
        assert!(f.contains(&Point3::from_coords(&p)));
        let proj = calib.p2 * p.push(1.0);
        assert!((proj.x / proj.z).abs() < 1e-9 && (proj.y / proj.z).abs() < 1e-9);
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let b = Box2D {
            x_min: 3.0,
            y_min: 1.0,
            x_max: 3.0,
            y_max: 5.0,
            class: ObjectClass::Car,
            score: None,
        };
        let err = build_frustum(&b, &CalibrationSet::identity(), 70.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateBox(_)));
        let err = build_frustum(&unit_box(), &CalibrationSet::identity(), 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParams(_)));
    }

    #[test]
    fn axis_coordinate_examples() {
        let f = unit_frustum();
        assert_eq!(f.axis_coordinate(&Point3::new(3.0, 4.0, 12.0)), 12.0);
        assert_eq!(f.axis_coordinate(&Point3::ORIGIN), 0.0);

        let axis = Vector3::new(0.0, 0.6, 0.8);
        let corners = [
            Vector3::new(-1.0, -0.2, 1.0),
            Vector3::new(1.0, -0.2, 1.0),
            Vector3::new(1.0, 1.7, 1.0),
            Vector3::new(-1.0, 1.7, 1.0),
        ];
        let tilted = Frustum::from_corner_rays(Vector3::zeros(), axis, corners, 0.0, 70.0).unwrap();
        let t = tilted.axis_coordinate(&Point3::new(0.0, 3.0, 4.0));
        assert!((t - 5.0).abs() < 1e-12, "{t}");
    }

    #[test]
    fn membership_examples() {
        let f = unit_frustum();
        assert!(f.contains(&Point3::new(0.0, 0.0, 10.0)));
        assert!(!f.contains(&Point3::new(0.0, 0.0, 71.0)));
        // (-10 + 1)/sqrt(2) < 0 against the right plane.
        assert!(!f.contains(&Point3::new(10.0, 0.0, 1.0)));
        assert!(!f.contains(&Point3::new(0.0, 0.0, -1.0)));
    }

    #[test]
    fn boundary_points_are_inside() {
        let f = unit_frustum();
        assert!(f.contains(&Point3::new(0.0, 0.0, 70.0)));
        assert!(f.contains(&Point3::ORIGIN));
        assert!(f.contains(&Point3::new(5.0, 5.0, 5.0)));
        assert!(!f.contains(&Point3::new(5.0 + 1e-9, 5.0, 5.0)));
    }

    #[test]
    fn selection_examples() {
        let f = unit_frustum();
        assert!(f.select_points(&rect(&[])).unwrap().is_empty());
        let sel = f.select_points(&rect(&[(0.0, 0.0, 10.0), (0.0, 0.0, 80.0)])).unwrap();
        assert_eq!(sel.indices, vec![0]);
        assert_eq!(sel.axis_coords, vec![10.0]);
    }

    #[test]
    fn lidar_cloud_is_rejected() {
        let err = unit_frustum()
            .select_points(&PointCloud::empty(Frame::Lidar))
            .unwrap_err();
        assert!(matches!(err, Error::Frame { .. }));
    }

    #[test]
    fn invalid_parts_are_rejected() {
        let planes = *unit_frustum().side_planes();
        let z = Vector3::new(0.0, 0.0, 1.0);
        assert!(Frustum::new(Vector3::zeros(), -z, planes, 0.0, 70.0).is_err());
        assert!(Frustum::new(Vector3::zeros(), z * 2.0, planes, 0.0, 70.0).is_err());
        assert!(Frustum::new(Vector3::zeros(), z, planes, 10.0, 10.0).is_err());
        assert!(Frustum::new(Vector3::zeros(), z, planes, -1.0, 10.0).is_err());
        let mut bad = planes;
        bad[0] *= 1.1;
        assert!(Frustum::new(Vector3::zeros(), z, bad, 0.0, 70.0).is_err());
    }
}
