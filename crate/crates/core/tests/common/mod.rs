#![allow(dead_code)]

use std::path::Path;

use frustum_ffs::eval::FrameData;
use frustum_ffs::frustum::{build_frustum, Frustum};
use frustum_ffs::kitti::{Box2D, CalibrationSet, ObjectClass};
use frustum_ffs::synth::{generate_frame, kitti_calibration, write_kitti_frame, write_split, ObjectSpec, SceneSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Brute-force slab histogram: every point is tested against every slab.
///
/// Returns `(counts, weights)`. Self hits and neighbor hits are tallied as
/// integers per slab and combined once, as `self + w * neighbor`.
pub fn brute_force_histogram(
    axis_coords: &[f64],
    near: f64,
    far: f64,
    bin_length: f64,
    neighbor_bins: usize,
    weight: f64,
) -> (Vec<u64>, Vec<f64>) {
    let n = (((far - near) / bin_length).ceil() as usize).max(1);
    let mut own = vec![0u64; n];
    let mut neighbor = vec![0u64; n];
    for &t in axis_coords {
        let q = (t - near) / bin_length;
        let mut parent = None;
        for b in 0..n {
            if (b as f64) <= q && q < (b + 1) as f64 {
                parent = Some(b);
                break;
            }
        }
        let parent = parent.unwrap_or(if q < 0.0 { 0 } else { n - 1 });
        for b in 0..n {
            let d = b.abs_diff(parent);
            if d == 0 {
                own[b] += 1;
            } else if d <= neighbor_bins {
                neighbor[b] += 1;
            }
        }
    }
    let weights = own
        .iter()
        .zip(&neighbor)
        .map(|(&o, &nb)| o as f64 + weight * nb as f64)
        .collect();
    (own, weights)
}

/// Same as above but adds `1` and `w` as floats point by point.
pub fn float_accumulated_weights(
    axis_coords: &[f64],
    near: f64,
    far: f64,
    bin_length: f64,
    neighbor_bins: usize,
    weight: f64,
) -> Vec<f64> {
    let n = (((far - near) / bin_length).ceil() as usize).max(1);
    let mut weights = vec![0.0; n];
    for &t in axis_coords {
        let parent = (((t - near) / bin_length).floor().max(0.0) as usize).min(n - 1);
        for (b, w) in weights.iter_mut().enumerate() {
            let d = b.abs_diff(parent);
            if d == 0 {
                *w += 1.0;
            } else if d <= neighbor_bins {
                *w += weight;
            }
        }
    }
    weights
}

/// Frustum of the box (-1,-1)-(1,1) under the identity calibration: the
/// axis is +z and the origin is the camera center.
pub fn unit_frustum(far: f64) -> Frustum {
    let b = Box2D::new(-1.0, -1.0, 1.0, 1.0, ObjectClass::Car).unwrap();
    build_frustum(&b, &CalibrationSet::identity(), far).unwrap()
}

/// A few frames with cars, pedestrians and cyclists at known depths.
pub fn synthetic_frames(count: usize, seed: u64) -> Vec<FrameData> {
    let calib = kitti_calibration();
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut objects = vec![
                ObjectSpec::new(ObjectClass::Car, rng.gen_range(-6.0..6.0), rng.gen_range(10.0..50.0), 400),
                ObjectSpec::new(ObjectClass::Pedestrian, rng.gen_range(-4.0..4.0), rng.gen_range(6.0..30.0), 120),
            ];
            if i % 2 == 0 {
                objects.push(ObjectSpec::new(ObjectClass::Cyclist, rng.gen_range(-5.0..5.0), rng.gen_range(8.0..35.0), 150));
            }
            let spec = SceneSpec {
                objects,
                clutter_points: 3000,
                ground_points: 2000,
            };
            generate_frame(&format!("{i:06}"), &spec, &calib, &mut rng).unwrap()
        })
        .collect()
}

/// Writes `frames` as a KITTI tree plus `split.txt` under `root`.
pub fn write_fixture(root: &Path, frames: &[FrameData]) {
    for frame in frames {
        write_kitti_frame(root, frame).unwrap();
    }
    let ids: Vec<String> = frames.iter().map(|f| f.id.clone()).collect();
    write_split(&root.join("split.txt"), &ids).unwrap();
}
