//! KITTI object-detection file formats and the LiDAR → rectified camera
//! transform chain.
//!
//! Files store single precision; everything is widened to `f64` on load so
//! that histogram and RMSE accumulation over large splits stays exact.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size of one velodyne record: x, y, z, reflectance as little-endian `f32`.
pub const VELODYNE_RECORD_BYTES: usize = 16;

/// Maximum deviation from orthonormality accepted for `R0_rect`.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lidar,
    RectCam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub reflectance: Option<f64>,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 {
            x,
            y,
            z,
            reflectance: None,
        }
    }

    pub const fn with_reflectance(mut self, reflectance: f64) -> Self {
        self.reflectance = Some(reflectance);
        self
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_coords(v: &Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.z.is_finite()
            && self.reflectance.is_none_or(f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub frame: Frame,
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(frame: Frame, points: Vec<Point3>) -> Self {
        PointCloud { frame, points }
    }

    pub fn empty(frame: Frame) -> Self {
        PointCloud::new(frame, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    pub(crate) fn expect_frame(&self, expected: Frame) -> Result<()> {
        if self.frame == expected {
            Ok(())
        } else {
            Err(Error::Frame {
                expected,
                found: self.frame,
            })
        }
    }
}

/// Decodes a velodyne scan. The result is always in the LiDAR frame.
pub fn parse_point_cloud(bytes: &[u8]) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(VELODYNE_RECORD_BYTES) {
        return Err(Error::Format(format!(
            "velodyne payload of {} bytes is not a multiple of {VELODYNE_RECORD_BYTES}",
            bytes.len()
        )));
    }
    let mut points = Vec::with_capacity(bytes.len() / VELODYNE_RECORD_BYTES);
    for (i, record) in bytes.chunks_exact(VELODYNE_RECORD_BYTES).enumerate() {
        let mut v = [0f64; 4];
        for (slot, raw) in v.iter_mut().zip(record.chunks_exact(4)) {
            let value = f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]);
            if !value.is_finite() {
                return Err(Error::Format(format!(
                    "non-finite value {value} in point record {i}"
                )));
            }
            *slot = f64::from(value);
        }
        points.push(Point3::new(v[0], v[1], v[2]).with_reflectance(v[3]));
    }
    Ok(PointCloud::new(Frame::Lidar, points))
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_point_cloud(&bytes).map_err(|e| with_path(e, path))
}

/// Encodes points in the velodyne layout. Coordinates are narrowed to `f32`;
/// a missing reflectance is written as zero.
pub fn encode_point_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * VELODYNE_RECORD_BYTES);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.reflectance.unwrap_or(0.0)] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_point_cloud(cloud)).map_err(|e| Error::io(path, e))
}

/// Camera projection and LiDAR extrinsics for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    /// Projects rectified-camera meters to left color image pixels.
    pub p2: Matrix3x4<f64>,
    pub r0_rect: Matrix3<f64>,
    /// Rigid transform from LiDAR meters to (unrectified) camera meters.
    pub tr_velo_to_cam: Matrix3x4<f64>,
}

impl CalibrationSet {
    pub fn new(
        p2: Matrix3x4<f64>,
        r0_rect: Matrix3<f64>,
        tr_velo_to_cam: Matrix3x4<f64>,
    ) -> Result<Self> {
        let calib = CalibrationSet {
            p2,
            r0_rect,
            tr_velo_to_cam,
        };
        calib.validate()?;
        Ok(calib)
    }

    pub fn identity() -> Self {
        CalibrationSet {
            p2: Matrix3x4::identity(),
            r0_rect: Matrix3::identity(),
            tr_velo_to_cam: Matrix3x4::identity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            let row_i = self.r0_rect.row(i);
            let norm_err = (row_i.norm() - 1.0).abs();
            if !(norm_err <= ORTHONORMAL_TOLERANCE) {
                return Err(Error::Validation(format!(
                    "R0_rect row {i} has norm {} (tolerance {ORTHONORMAL_TOLERANCE})",
                    row_i.norm()
                )));
            }
            for j in (i + 1)..3 {
                let dot = row_i.dot(&self.r0_rect.row(j));
                if !(dot.abs() <= ORTHONORMAL_TOLERANCE) {
                    return Err(Error::Validation(format!(
                        "R0_rect rows {i} and {j} have dot product {dot} (tolerance {ORTHONORMAL_TOLERANCE})"
                    )));
                }
            }
        }
        if !(self.p2[(0, 0)] > 0.0 && self.p2[(1, 1)] > 0.0) {
            return Err(Error::Validation(format!(
                "P2 focal lengths must be positive, got fx = {}, fy = {}",
                self.p2[(0, 0)],
                self.p2[(1, 1)]
            )));
        }
        Ok(())
    }

    /// Maps one LiDAR point into the rectified camera frame.
    pub fn velo_point_to_rect(&self, p: &Point3) -> Point3 {
        let cam = self.tr_velo_to_cam * Vector4::new(p.x, p.y, p.z, 1.0);
        let rect = self.r0_rect * cam;
        Point3 {
            x: rect.x,
            y: rect.y,
            z: rect.z,
            reflectance: p.reflectance,
        }
    }

    /// Inverse of [`velo_to_rect`] for a single point. Fails if the
    /// extrinsics are singular.
    pub fn rect_point_to_velo(&self, p: &Point3) -> Result<Point3> {
        let (rot, trans) = self.velo_to_rect_affine();
        let inv = rot
            .try_inverse()
            .ok_or_else(|| Error::Validation("LiDAR-to-camera transform is singular".into()))?;
        let v = inv * (p.coords() - trans);
        Ok(Point3 {
            x: v.x,
            y: v.y,
            z: v.z,
            reflectance: p.reflectance,
        })
    }

    /// The full LiDAR → rectified transform as `(linear, translation)`.
    pub fn velo_to_rect_affine(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let rot = self.r0_rect * self.tr_velo_to_cam.fixed_view::<3, 3>(0, 0);
        let trans = self.r0_rect * self.tr_velo_to_cam.column(3);
        (rot, trans)
    }

    /// Renders the three required keys in the KITTI calib text layout.
    pub fn to_kitti_text(&self) -> String {
        fn row_major<const R: usize, const C: usize>(
            m: &nalgebra::SMatrix<f64, R, C>,
        ) -> String {
            let mut vals = Vec::with_capacity(R * C);
            for r in 0..R {
                for c in 0..C {
                    vals.push(format!("{:e}", m[(r, c)]));
                }
            }
            vals.join(" ")
        }
        format!(
            "P2: {}\nR0_rect: {}\nTr_velo_to_cam: {}\n",
            row_major(&self.p2),
            row_major(&self.r0_rect),
            row_major(&self.tr_velo_to_cam)
        )
    }
}

/// Maps every point of a LiDAR cloud into the rectified camera frame,
/// preserving order and reflectance.
pub fn velo_to_rect(cloud: &PointCloud, calib: &CalibrationSet) -> Result<PointCloud> {
    cloud.expect_frame(Frame::Lidar)?;
    let points = cloud
        .points
        .iter()
        .map(|p| calib.velo_point_to_rect(p))
        .collect();
    Ok(PointCloud::new(Frame::RectCam, points))
}

pub fn rect_to_velo(cloud: &PointCloud, calib: &CalibrationSet) -> Result<PointCloud> {
    cloud.expect_frame(Frame::RectCam)?;
    let points = cloud
        .points
        .iter()
        .map(|p| calib.rect_point_to_velo(p))
        .collect::<Result<_>>()?;
    Ok(PointCloud::new(Frame::Lidar, points))
}

/// Parses calib text. Unknown keys are ignored; `R_rect` and `Tr_velo_cam`
/// (tracking-benchmark spellings) are accepted as aliases.
pub fn parse_calibration(text: &str) -> Result<CalibrationSet> {
    let mut p2 = None;
    let mut r0 = None;
    let mut tr = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let slot = match key.trim() {
            "P2" => &mut p2,
            "R0_rect" | "R_rect" => &mut r0,
            "Tr_velo_to_cam" | "Tr_velo_cam" => &mut tr,
            _ => continue,
        };
        let values = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::Format(format!(
                            "line {}: cannot parse {tok:?} as a number",
                            lineno + 1
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        *slot = Some((key.trim().to_string(), values));
    }

    let take = |slot: Option<(String, Vec<f64>)>, name: &str, n: usize| -> Result<Vec<f64>> {
        let (key, values) =
            slot.ok_or_else(|| Error::Format(format!("missing required key {name}")))?;
        if values.len() != n {
            return Err(Error::Format(format!(
                "{key} has {} values, expected {n}",
                values.len()
            )));
        }
        Ok(values)
    };
    let p2 = take(p2, "P2", 12)?;
    let r0 = take(r0, "R0_rect", 9)?;
    let tr = take(tr, "Tr_velo_to_cam", 12)?;

    CalibrationSet::new(
        Matrix3x4::from_row_slice(&p2),
        Matrix3::from_row_slice(&r0),
        Matrix3x4::from_row_slice(&tr),
    )
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<CalibrationSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration(&text).map_err(|e| with_path(e, path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Car,
    Pedestrian,
    Cyclist,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [
        ObjectClass::Car,
        ObjectClass::Pedestrian,
        ObjectClass::Cyclist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Car => "Car",
            ObjectClass::Pedestrian => "Pedestrian",
            ObjectClass::Cyclist => "Cyclist",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Car" => Ok(ObjectClass::Car),
            "Pedestrian" => Ok(ObjectClass::Pedestrian),
            "Cyclist" => Ok(ObjectClass::Cyclist),
            other => Err(Error::Format(format!("unknown object class {other:?}"))),
        }
    }
}

/// An axis-aligned image box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub class: ObjectClass,
    pub score: Option<f64>,
}

impl Box2D {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, class: ObjectClass) -> Result<Self> {
        let b = Box2D {
            x_min,
            y_min,
            x_max,
            y_max,
            class,
            score: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.x_min < self.x_max) || !(self.y_min < self.y_max) {
            return Err(Error::DegenerateBox(format!(
                "({}, {}, {}, {})",
                self.x_min, self.y_min, self.x_max, self.y_max
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Grows the box by `pixels` on every side.
    pub fn dilate(&self, pixels: f64) -> Self {
        Box2D {
            x_min: self.x_min - pixels,
            y_min: self.y_min - pixels,
            x_max: self.x_max + pixels,
            y_max: self.y_max + pixels,
            ..*self
        }
    }

    /// Corners in cyclic order: top-left, top-right, bottom-right, bottom-left.
    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        ]
    }
}

/// KITTI difficulty levels (minimum box height, maximum occlusion, maximum
/// truncation): Easy (40 px, 0, 0.15), Moderate (25 px, 1, 0.30),
/// Hard (25 px, 2, 0.50).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    fn limits(self) -> (f64, u8, f64) {
        match self {
            Difficulty::Easy => (40.0, 0, 0.15),
            Difficulty::Moderate => (25.0, 1, 0.30),
            Difficulty::Hard => (25.0, 2, 0.50),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub class: ObjectClass,
    /// Volumetric center in the rectified camera frame.
    pub center: Point3,
    pub height: f64,
    pub width: f64,
    pub length: f64,
    pub yaw: f64,
    pub box2d: Box2D,
    pub truncation: f64,
    pub occlusion: u8,
}

impl GroundTruthObject {
    /// The easiest KITTI difficulty this object qualifies for.
    pub fn difficulty(&self) -> Option<Difficulty> {
        Difficulty::ALL.into_iter().find(|d| {
            let (min_height, max_occ, max_trunc) = d.limits();
            self.box2d.height() >= min_height
                && self.occlusion <= max_occ
                && self.truncation <= max_trunc
        })
    }

    /// The bottom-center location stored in label files.
    pub fn bottom_center(&self) -> Point3 {
        Point3::new(
            self.center.x,
            self.center.y + 0.5 * self.height,
            self.center.z,
        )
    }

    /// Renders a 15-field label line.
    pub fn to_label_line(&self) -> String {
        let bc = self.bottom_center();
        let alpha = self.yaw - bc.x.atan2(bc.z);
        format!(
            "{} {:.2} {} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2}",
            self.class,
            self.truncation,
            self.occlusion,
            alpha,
            self.box2d.x_min,
            self.box2d.y_min,
            self.box2d.x_max,
            self.box2d.y_max,
            self.height,
            self.width,
            self.length,
            bc.x,
            bc.y,
            bc.z,
            self.yaw
        )
    }
}

const LABEL_FIELDS: usize = 15;

fn parse_fields(line: &str, lineno: usize, allow_score: bool) -> Result<Vec<&str>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let ok = fields.len() == LABEL_FIELDS || (allow_score && fields.len() == LABEL_FIELDS + 1);
    if !ok {
        return Err(Error::Format(format!(
            "line {lineno}: expected {LABEL_FIELDS}{} fields, found {}",
            if allow_score { " or 16" } else { "" },
            fields.len()
        )));
    }
    Ok(fields)
}

fn parse_num(fields: &[&str], idx: usize, lineno: usize) -> Result<f64> {
    fields[idx]
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            Error::Format(format!(
                "line {lineno}: field {} ({:?}) is not a finite number",
                idx + 1,
                fields[idx]
            ))
        })
}

fn parse_box(fields: &[&str], class: ObjectClass, lineno: usize) -> Result<Box2D> {
    let b = Box2D {
        x_min: parse_num(fields, 4, lineno)?,
        y_min: parse_num(fields, 5, lineno)?,
        x_max: parse_num(fields, 6, lineno)?,
        y_max: parse_num(fields, 7, lineno)?,
        class,
        score: None,
    };
    b.validate()
        .map_err(|e| Error::Validation(format!("line {lineno}: {e}")))?;
    Ok(b)
}

/// Parses label text, keeping Car, Pedestrian and Cyclist objects only.
pub fn parse_labels(text: &str) -> Result<Vec<GroundTruthObject>> {
    let mut objects = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f = parse_fields(line, lineno, false)?;
        // Numeric fields are checked on skipped lines too.
        let nums = (1..LABEL_FIELDS)
            .map(|idx| parse_num(&f, idx, lineno))
            .collect::<Result<Vec<_>>>()?;
        let Ok(class) = f[0].parse::<ObjectClass>() else {
            continue;
        };
        let truncation = nums[0];
        let occ = nums[1];
        if !(0.0..=1.0).contains(&truncation) {
            return Err(Error::Validation(format!(
                "line {lineno}: truncation {truncation} outside [0, 1]"
            )));
        }
        if occ.fract() != 0.0 || !(0.0..=3.0).contains(&occ) {
            return Err(Error::Format(format!(
                "line {lineno}: occlusion {occ} is not one of 0, 1, 2, 3"
            )));
        }
        let box2d = parse_box(&f, class, lineno)?;
        let (height, width, length) = (nums[7], nums[8], nums[9]);
        if !(height > 0.0 && width > 0.0 && length > 0.0) {
            return Err(Error::Validation(format!(
                "line {lineno}: dimensions ({height}, {width}, {length}) must be positive"
            )));
        }
        let yaw = nums[13];
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&yaw) {
            return Err(Error::Validation(format!(
                "line {lineno}: rotation_y {yaw} outside [-pi, pi]"
            )));
        }
        // Camera y points down: the volumetric center sits h/2 above the
        // stored bottom-center.
        let center = Point3::new(nums[10], nums[11] - 0.5 * height, nums[12]);
        objects.push(GroundTruthObject {
            class,
            center,
            height,
            width,
            length,
            yaw,
            box2d,
            truncation,
            occlusion: occ as u8,
        });
    }
    Ok(objects)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<GroundTruthObject>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text).map_err(|e| with_path(e, path))
}

/// Parses 2D detector output in label layout with an optional 16th score
/// field. Only the class, box and score are consumed.
pub fn parse_detections(text: &str) -> Result<Vec<Box2D>> {
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f = parse_fields(line, lineno, true)?;
        let Ok(class) = f[0].parse::<ObjectClass>() else {
            continue;
        };
        let mut b = parse_box(&f, class, lineno)?;
        if f.len() == LABEL_FIELDS + 1 {
            b.score = Some(parse_num(&f, LABEL_FIELDS, lineno)?);
        }
        boxes.push(b);
    }
    Ok(boxes)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Box2D>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text).map_err(|e| with_path(e, path))
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(values: &[[f32; 4]]) -> Vec<u8> {
        values
            .iter()
            .flat_map(|r| r.iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    #[test]
    fn decodes_two_records() {
        let bytes = encode(&[[1.0, 2.0, 3.0, 0.5], [4.0, 5.0, 6.0, 0.1]]);
        assert_eq!(bytes.len(), 32);
        let cloud = parse_point_cloud(&bytes).unwrap();
        assert_eq!(cloud.frame, Frame::Lidar);
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points[0], Point3::new(1.0, 2.0, 3.0).with_reflectance(0.5));
        assert_eq!(cloud.points[1].z, 6.0);
        assert_eq!(cloud.points[1].reflectance, Some(f64::from(0.1f32)));
    }

    #[test]
    fn empty_payload_is_empty_cloud() {
        let cloud = parse_point_cloud(&[]).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn misaligned_payload_is_rejected() {
        let err = parse_point_cloud(&[0u8; 17]).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let bytes = encode(&[[1.0, f32::NAN, 3.0, 0.5]]);
        assert!(matches!(parse_point_cloud(&bytes), Err(Error::Format(_))));
        let bytes = encode(&[[1.0, 2.0, 3.0, f32::INFINITY]]);
        assert!(matches!(parse_point_cloud(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_point_cloud("/definitely/not/here.bin").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/definitely/not/here.bin"));
    }

    const IDENTITY_CALIB: &str = "P0: 1 0 0 0 0 1 0 0 0 0 1 0\n\
        P2: 1 0 0 0 0 1 0 0 0 0 1 0\n\
        R0_rect: 1 0 0 0 1 0 0 0 1\n\
        Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n\
        Tr_imu_to_velo: 1 0 0 0 0 1 0 0 0 0 1 0\n";

    #[test]
    fn identity_calibration() {
        let calib = parse_calibration(IDENTITY_CALIB).unwrap();
        assert_eq!(calib, CalibrationSet::identity());
    }

    #[test]
    fn missing_r0_is_format_error() {
        let text = "P2: 1 0 0 0 0 1 0 0 0 0 1 0\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";
        let err = parse_calibration(text).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("R0_rect")), "{err}");
    }

    #[test]
    fn wrong_value_count_is_format_error() {
        let text = IDENTITY_CALIB.replace("R0_rect: 1 0 0 0 1 0 0 0 1", "R0_rect: 1 0 0 0 1 0 0 0");
        assert!(matches!(parse_calibration(&text), Err(Error::Format(_))));
        let text = IDENTITY_CALIB.replace("P2: 1 0", "P2: one 0");
        assert!(matches!(parse_calibration(&text), Err(Error::Format(_))));
    }

    #[test]
    fn all_ones_rotation_fails_validation() {
        // Rows of the all-ones matrix have norm sqrt(3) and pairwise dot 3.
        let text = IDENTITY_CALIB.replace("R0_rect: 1 0 0 0 1 0 0 0 1", "R0_rect: 1 1 1 1 1 1 1 1 1");
        assert!(matches!(parse_calibration(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn non_positive_focal_fails_validation() {
        let text = IDENTITY_CALIB.replace("P2: 1 0", "P2: -1 0");
        assert!(matches!(parse_calibration(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn calib_text_round_trips() {
        let calib = parse_calibration(IDENTITY_CALIB).unwrap();
        assert_eq!(parse_calibration(&calib.to_kitti_text()).unwrap(), calib);
    }

    #[test]
    fn label_center_is_volumetric() {
        let objs = parse_labels("Car 0 0 0 0 0 100 100 2 1.6 3.9 5 1 20 0\n").unwrap();
        assert_eq!(objs.len(), 1);
        let car = &objs[0];
        assert_eq!(car.class, ObjectClass::Car);
        assert_eq!((car.center.x, car.center.y, car.center.z), (5.0, 0.0, 20.0));
        assert_eq!((car.height, car.width, car.length), (2.0, 1.6, 3.9));
        assert_eq!(car.box2d.x_max, 100.0);
    }

    #[test]
    fn dontcare_and_other_classes_are_skipped() {
        let text = "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10\n";
        assert!(parse_labels(text).unwrap().is_empty());
        let text = "Van 0.00 0 -1.57 100 100 200 200 2.0 1.8 4.5 1.0 1.5 20.0 -1.5\n";
        assert!(parse_labels(text).unwrap().is_empty());
    }

    #[test]
    fn short_label_line_is_format_error() {
        let err = parse_labels("Car 0 0 0 0 0 100 100 2 1.6 3.9 5 1 20\n").unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("14")), "{err}");
        let err = parse_labels("Car 0 0 0 0 0 100 100 2 1.6 3.9 5 1 20 0 0.9\n").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn label_line_round_trips() {
        let line = "Pedestrian 0.00 1 0.30 712.40 143.00 810.73 307.92 1.89 0.48 1.20 1.84 1.47 8.41 0.01";
        let obj = parse_labels(line).unwrap().remove(0);
        assert_eq!(parse_labels(&obj.to_label_line()).unwrap()[0].center, obj.center);
        assert_eq!(obj.difficulty(), Some(Difficulty::Moderate));
    }

    #[test]
    fn detections_accept_score_field() {
        let text = "Car -1 -1 -10 100 120 180 160 -1 -1 -1 -1000 -1000 -1000 -10 0.93\n\
                    Cyclist -1 -1 -10 300 120 330 190 -1 -1 -1 -1000 -1000 -1000 -10\n";
        let boxes = parse_detections(text).unwrap();
        assert_eq!(boxes.len(), 2);
        assert_eq!(boxes[0].score, Some(0.93));
        assert_eq!(boxes[1].class, ObjectClass::Cyclist);
        assert_eq!(boxes[1].score, None);
    }

    #[test]
    fn difficulty_thresholds() {
        let mut obj = parse_labels("Car 0 0 0 0 0 100 100 2 1.6 3.9 5 1 20 0").unwrap().remove(0);
        assert_eq!(obj.difficulty(), Some(Difficulty::Easy));
        obj.box2d.y_max = 30.0;
        assert_eq!(obj.difficulty(), Some(Difficulty::Moderate));
        obj.occlusion = 2;
        assert_eq!(obj.difficulty(), Some(Difficulty::Hard));
        obj.occlusion = 3;
        assert_eq!(obj.difficulty(), None);
    }

    #[test]
    fn identity_transform() {
        let cloud = PointCloud::new(Frame::Lidar, vec![Point3::new(1.0, 2.0, 3.0)]);
        let rect = velo_to_rect(&cloud, &CalibrationSet::identity()).unwrap();
        assert_eq!(rect.frame, Frame::RectCam);
        assert_eq!(rect.points[0].coords(), Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn pure_translation() {
        let mut calib = CalibrationSet::identity();
        calib.tr_velo_to_cam[(2, 3)] = -1.0;
        let cloud = PointCloud::new(Frame::Lidar, vec![Point3::new(0.0, 0.0, 5.0)]);
        let rect = velo_to_rect(&cloud, &calib).unwrap();
        assert_eq!(rect.points[0].coords(), Vector3::new(0.0, 0.0, 4.0));
    }

    #[test]
    fn quarter_turn_about_z() {
        let mut calib = CalibrationSet::identity();
        let half_pi = std::f64::consts::FRAC_PI_2;
        calib.r0_rect = Matrix3::new(
            half_pi.cos(), -half_pi.sin(), 0.0,
            half_pi.sin(), half_pi.cos(), 0.0,
            0.0, 0.0, 1.0,
        );
        let cloud = PointCloud::new(
            Frame::Lidar,
            vec![Point3::new(1.0, 0.0, 0.0).with_reflectance(0.25)],
        );
        let p = velo_to_rect(&cloud, &calib).unwrap().points[0];
        assert!((p.x - 0.0).abs() < 1e-6 && (p.y - 1.0).abs() < 1e-6 && p.z.abs() < 1e-6);
        assert_eq!(p.reflectance, Some(0.25));
    }

    #[test]
    fn rect_cloud_is_rejected() {
        let cloud = PointCloud::empty(Frame::RectCam);
        let err = velo_to_rect(&cloud, &CalibrationSet::identity()).unwrap_err();
        assert!(matches!(
            err,
            Error::Frame {
                expected: Frame::Lidar,
                found: Frame::RectCam
            }
        ));
    }
}
