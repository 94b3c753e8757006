//! Load a KITTI frame (velodyne scan, calibration, labels) and move the scan
//! into the rectified camera frame.
//!
//! ```text
//! cargo run --example load_kitti_frame -- /path/to/kitti/training 000008
//! cargo run --example load_kitti_frame            # synthetic frame
//! ```

use std::path::PathBuf;

use frustum_ffs::prelude::*;
use frustum_ffs::synth::{generate_frame, kitti_calibration, write_kitti_frame, ObjectSpec, SceneSpec};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let (root, id, _tmp) = match (args.next(), args.next()) {
        (Some(root), Some(id)) => (PathBuf::from(root), id, None),
        _ => {
            let tmp = tempfile::tempdir()?;
            let spec = SceneSpec {
                objects: vec![
                    ObjectSpec::new(ObjectClass::Car, 2.0, 18.0, 600),
                    ObjectSpec::new(ObjectClass::Pedestrian, -3.0, 11.0, 150),
                ],
                clutter_points: 4000,
                ground_points: 4000,
            };
            let frame = generate_frame("000000", &spec, &kitti_calibration(), &mut StdRng::seed_from_u64(7))?;
            write_kitti_frame(tmp.path(), &frame)?;
            (tmp.path().to_path_buf(), frame.id, Some(tmp))
        }
    };

    let scan = load_point_cloud(root.join("velodyne").join(format!("{id}.bin")))?;
    let calib = load_calibration(root.join("calib").join(format!("{id}.txt")))?;
    let labels = load_labels(root.join("label_2").join(format!("{id}.txt")))?;
    let rect = velo_to_rect(&scan, &calib)?;

    println!("frame {id}: {} points", scan.len());
    let first = &scan.points[0];
    let moved = &rect.points[0];
    println!(
        "first point: velodyne ({:.2}, {:.2}, {:.2}) -> rect ({:.2}, {:.2}, {:.2})",
        first.x, first.y, first.z, moved.x, moved.y, moved.z
    );
    println!("P2 focal length {:.1} px", calib.p2[(0, 0)]);
    for gt in &labels {
        println!(
            "{:<10} box ({:.0}, {:.0})-({:.0}, {:.0})  center z = {:.2} m  {:?}",
            gt.class,
            gt.box2d.x_min,
            gt.box2d.y_min,
            gt.box2d.x_max,
            gt.box2d.y_max,
            gt.center.z,
            gt.difficulty()
        );
    }
    Ok(())
}
