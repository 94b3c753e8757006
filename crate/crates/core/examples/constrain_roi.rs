//! Step through the heuristic on one frustum: histogram, smearing, peak and
//! the constrained RoI.
//!
//! ```text
//! cargo run --example constrain_roi
//! ```

use frustum_ffs::prelude::*;
use frustum_ffs::synth::{generate_frame, kitti_calibration, ObjectSpec, SceneSpec};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> frustum_ffs::Result<()> {
    let calib = kitti_calibration();
    let spec = SceneSpec {
        objects: vec![ObjectSpec::new(ObjectClass::Car, -1.0, 31.0, 400)],
        clutter_points: 5000,
        ground_points: 5000,
    };
    let frame = generate_frame("000000", &spec, &calib, &mut StdRng::seed_from_u64(3))?;
    let car = &frame.objects[0];
    let params = HeuristicParams::default();

    let frustum = build_frustum(&car.box2d, &calib, params.far_plane)?;
    let selection = frustum.select_points(&frame.cloud)?;
    let hist = smear_weights(build_histogram(&selection, &frustum, &params)?, &params)?;
    let (peak, c) = peak_bin(&hist)?;
    println!("{} bins of {} m, peak bin {peak} at c = {c:.3} m", hist.num_bins(), params.bin_length);
    for i in peak.saturating_sub(3)..(peak + 4).min(hist.num_bins()) {
        println!("  bin {i:>3}  count {:>4}  weight {:>7.1}", hist.counts()[i], hist.weights()[i]);
    }

    let roi = constrain_roi(&frustum, c, params.roi_length)?;
    let kept = filter_points(&roi, &selection);
    println!("RoI [{:.2}, {:.2}] m keeps {} of {} points", roi.near_c, roi.far_c, kept.len(), selection.len());
    println!("ground truth at {:.2} m", frustum.axis_coordinate(&car.center));

    // The same thing in one call.
    let out = run_ffs(&frame.cloud, &car.box2d, &calib, &params)?;
    assert_eq!(out.retained, kept);
    Ok(())
}
