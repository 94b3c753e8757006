//! Synthetic KITTI-style scenes for tests, examples and benchmarks.
//!
//! Scenes are built in the rectified camera frame (x right, y down,
//! z forward) and can be written out as a KITTI directory tree.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4, Rotation3, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::FrameData;
use crate::frustum::{CameraRays, Frustum};
use crate::kitti::{
    encode_point_cloud, rect_to_velo, Box2D, CalibrationSet, Frame, GroundTruthObject, ObjectClass, Point3,
    PointCloud,
};

pub const IMAGE_WIDTH: f64 = 1242.0;
pub const IMAGE_HEIGHT: f64 = 375.0;
/// Height of the camera above the road, meters.
pub const CAMERA_HEIGHT: f64 = 1.65;

/// Calibration of the first KITTI object-detection training frame.
pub fn kitti_calibration() -> CalibrationSet {
    CalibrationSet::new(
        Matrix3x4::new(
            7.215377e2, 0.0, 6.095593e2, 4.485728e1,
            0.0, 7.215377e2, 1.72854e2, 2.163791e-1,
            0.0, 0.0, 1.0, 2.745884e-3,
        ),
        Matrix3::new(
            9.999239e-1, 9.83776e-3, -7.445048e-3,
            -9.869795e-3, 9.999421e-1, -4.278459e-3,
            7.402527e-3, 4.351614e-3, 9.999631e-1,
        ),
        Matrix3x4::new(
            7.533745e-3, -9.999714e-1, -6.16602e-4, -4.069766e-3,
            1.480249e-2, 7.280733e-4, -9.998902e-1, -7.631618e-2,
            9.998621e-1, 7.52379e-3, 1.480755e-2, -2.717806e-1,
        ),
    )
    .expect("reference calibration is valid")
}

/// A box-shaped object to place in a scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub class: ObjectClass,
    /// Lateral offset of the volumetric center, meters.
    pub x: f64,
    /// Depth of the volumetric center, meters.
    pub z: f64,
    pub yaw: f64,
    /// LiDAR returns sampled uniformly inside the box.
    pub points: usize,
}

impl ObjectSpec {
    pub fn new(class: ObjectClass, x: f64, z: f64, points: usize) -> Self {
        ObjectSpec {
            class,
            x,
            z,
            yaw: 0.0,
            points,
        }
    }

    /// Typical (height, width, length) for the class.
    pub fn dimensions(&self) -> (f64, f64, f64) {
        match self.class {
            ObjectClass::Car => (1.53, 1.63, 3.88),
            ObjectClass::Pedestrian => (1.76, 0.66, 0.84),
            ObjectClass::Cyclist => (1.74, 0.60, 1.76),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
    /// Points scattered through the camera's field of view.
    pub clutter_points: usize,
    /// Points on the road plane.
    pub ground_points: usize,
}

/// Samples a scene. Objects whose image box falls outside the image are
/// dropped from the labels but keep their points.
pub fn generate_frame<R: Rng>(id: &str, spec: &SceneSpec, calib: &CalibrationSet, rng: &mut R) -> Result<FrameData> {
    let rays = CameraRays::from_calibration(calib)?;
    let mut points = Vec::new();
    let mut objects = Vec::new();

    for obj in &spec.objects {
        let (h, w, l) = obj.dimensions();
        // Object bottoms rest on the road.
        let center = Vector3::new(obj.x, CAMERA_HEIGHT - 0.5 * h, obj.z);
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), obj.yaw);
        for _ in 0..obj.points {
            let local = Vector3::new(
                rng.gen_range(-0.5..0.5) * l,
                rng.gen_range(-0.5..0.5) * h,
                rng.gen_range(-0.5..0.5) * w,
            );
            points.push(Point3::from_coords(&(center + rot * local)).with_reflectance(rng.gen_range(0.0..1.0)));
        }
        if let Some(box2d) = project_box(calib, &center, &rot, (h, w, l), obj.class) {
            objects.push(GroundTruthObject {
                class: obj.class,
                center: Point3::from_coords(&center),
                height: h,
                width: w,
                length: l,
                yaw: obj.yaw,
                box2d,
                truncation: 0.0,
                occlusion: 0,
            });
        }
    }

    for _ in 0..spec.clutter_points {
        let ray = rays.ray(rng.gen_range(0.0..IMAGE_WIDTH), rng.gen_range(0.0..IMAGE_HEIGHT));
        let depth = rng.gen_range(2.0..80.0);
        let p = rays.center() + ray * (depth / ray.z);
        points.push(Point3::from_coords(&p).with_reflectance(rng.gen_range(0.0..1.0)));
    }
    for _ in 0..spec.ground_points {
        let z = rng.gen_range(3.0..80.0);
        let x = rng.gen_range(-0.6..0.6) * z;
        points.push(Point3::new(x, CAMERA_HEIGHT, z).with_reflectance(rng.gen_range(0.0..0.3)));
    }

    Ok(FrameData {
        id: id.to_string(),
        cloud: PointCloud::new(Frame::RectCam, points),
        calib: calib.clone(),
        objects,
    })
}

fn project_box(
    calib: &CalibrationSet,
    center: &Vector3<f64>,
    rot: &Rotation3<f64>,
    (h, w, l): (f64, f64, f64),
    class: ObjectClass,
) -> Option<Box2D> {
    let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for sx in [-0.5, 0.5] {
        for sy in [-0.5, 0.5] {
            for sz in [-0.5, 0.5] {
                let p = center + rot * Vector3::new(sx * l, sy * h, sz * w);
                let q = calib.p2 * p.push(1.0);
                if q.z <= 0.1 {
                    return None;
                }
                let (u, v) = (q.x / q.z, q.y / q.z);
                u0 = u0.min(u);
                v0 = v0.min(v);
                u1 = u1.max(u);
                v1 = v1.max(v);
            }
        }
    }
    // Round to the label file's two decimals so written and in-memory
    // fixtures agree.
    let round = |v: f64| (v * 100.0).round() / 100.0;
    Box2D::new(
        round(u0.max(0.0)),
        round(v0.max(0.0)),
        round(u1.min(IMAGE_WIDTH - 1.0)),
        round(v1.min(IMAGE_HEIGHT - 1.0)),
        class,
    )
    .ok()
}

/// Writes `velodyne/`, `calib/` and `label_2/` entries for `frame` under
/// `root`, creating the directories as needed.
pub fn write_kitti_frame(root: &Path, frame: &FrameData) -> Result<()> {
    for sub in ["velodyne", "calib", "label_2"] {
        let dir = root.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let lidar = match frame.cloud.frame {
        Frame::Lidar => frame.cloud.clone(),
        Frame::RectCam => rect_to_velo(&frame.cloud, &frame.calib)?,
    };
    let write = |path: std::path::PathBuf, bytes: &[u8]| fs::write(&path, bytes).map_err(|e| Error::io(&path, e));
    write(root.join("velodyne").join(format!("{}.bin", frame.id)), &encode_point_cloud(&lidar))?;
    write(root.join("calib").join(format!("{}.txt", frame.id)), frame.calib.to_kitti_text().as_bytes())?;
    let labels: String = frame.objects.iter().map(|o| o.to_label_line() + "\n").collect();
    write(root.join("label_2").join(format!("{}.txt", frame.id)), labels.as_bytes())
}

pub fn write_split(path: &Path, ids: &[String]) -> Result<()> {
    let text: String = ids.iter().map(|id| format!("{id}\n")).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Draws points inside a frustum at chosen axis coordinates.
///
/// A pixel is drawn uniformly inside the (slightly shrunk) box and its ray is
/// followed to the requested axis coordinate, so every sample lies inside the
/// frustum.
#[derive(Debug, Clone)]
pub struct FrustumSampler {
    rays: CameraRays,
    bbox: Box2D,
    axis: Vector3<f64>,
}

impl FrustumSampler {
    pub fn new(bbox: &Box2D, calib: &CalibrationSet, frustum: &Frustum) -> Result<Self> {
        Ok(FrustumSampler {
            rays: CameraRays::from_calibration(calib)?,
            bbox: *bbox,
            axis: frustum.axis(),
        })
    }

    pub fn sample<R: Rng>(&self, t: f64, rng: &mut R) -> Point3 {
        let margin_u = 1e-6 * (self.bbox.x_max - self.bbox.x_min);
        let margin_v = 1e-6 * (self.bbox.y_max - self.bbox.y_min);
        let u = rng.gen_range(self.bbox.x_min + margin_u..self.bbox.x_max - margin_u);
        let v = rng.gen_range(self.bbox.y_min + margin_v..self.bbox.y_max - margin_v);
        let ray = self.rays.ray(u, v);
        let p = self.rays.center() + ray * (t / ray.dot(&self.axis));
        Point3::from_coords(&p)
    }
}
