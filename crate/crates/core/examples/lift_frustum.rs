//! Lift a 2D box to a 3D frustum and select the LiDAR points inside it.
//!
//! ```text
//! cargo run --example lift_frustum
//! ```

use frustum_ffs::prelude::*;
use frustum_ffs::synth::{generate_frame, kitti_calibration, ObjectSpec, SceneSpec};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> frustum_ffs::Result<()> {
    let calib = kitti_calibration();
    let spec = SceneSpec {
        objects: vec![ObjectSpec::new(ObjectClass::Car, 1.5, 24.0, 500)],
        clutter_points: 6000,
        ground_points: 6000,
    };
    let frame = generate_frame("000000", &spec, &calib, &mut StdRng::seed_from_u64(1))?;
    let car = &frame.objects[0];

    let frustum = build_frustum(&car.box2d, &calib, 70.0)?;
    let axis = frustum.axis();
    println!("origin {:.3?}", frustum.origin().as_slice());
    println!("axis   ({:.4}, {:.4}, {:.4})", axis.x, axis.y, axis.z);
    for (name, n) in ["top", "right", "bottom", "left"].iter().zip(frustum.side_planes()) {
        println!("{name:<6} plane normal ({:+.4}, {:+.4}, {:+.4})", n.x, n.y, n.z);
    }

    let selection = frustum.select_points(&frame.cloud)?;
    println!("{} of {} scene points fall inside the frustum", selection.len(), frame.cloud.len());
    println!(
        "ground-truth center sits at axis coordinate {:.2} m",
        frustum.axis_coordinate(&car.center)
    );
    Ok(())
}
