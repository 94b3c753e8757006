//! Sweep bin length and smearing radius on a synthetic split and list the
//! best cells by RMSE.
//!
//! ```text
//! cargo run --release --example grid_search
//! ```

use frustum_ffs::eval::{grid_search, Baseline, GridSpec, InMemoryDataset};
use frustum_ffs::kitti::ObjectClass;
use frustum_ffs::synth::{generate_frame, kitti_calibration, ObjectSpec, SceneSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> frustum_ffs::Result<()> {
    let calib = kitti_calibration();
    let mut rng = StdRng::seed_from_u64(5);
    let frames = (0..20)
        .map(|i| {
            let spec = SceneSpec {
                objects: vec![
                    ObjectSpec::new(ObjectClass::Car, rng.gen_range(-8.0..8.0), rng.gen_range(8.0..55.0), 300),
                    ObjectSpec::new(ObjectClass::Pedestrian, rng.gen_range(-5.0..5.0), rng.gen_range(6.0..35.0), 80),
                ],
                clutter_points: 4000,
                ground_points: 4000,
            };
            generate_frame(&format!("{i:06}"), &spec, &calib, &mut rng)
        })
        .collect::<frustum_ffs::Result<Vec<_>>>()?;

    let grid = GridSpec {
        bin_lengths: vec![0.25, 0.5, 0.75, 1.0, 1.5],
        neighbor_bins: (0..=10).collect(),
        weights: vec![0.5, 1.0],
        roi_lengths: vec![30.0],
        far_plane: 70.0,
        box_dilation: 0.0,
    };
    let result = grid_search(&InMemoryDataset::new(frames), &grid, Baseline::Ffs, &ObjectClass::ALL, 4)?;
    println!("{} cells over {} frames", result.cells.len(), result.frames);
    println!("bin_length neighbor_bins weight   rmse");
    for cell in result.cells.iter().take(10) {
        let p = &cell.params;
        println!(
            "{:>10} {:>13} {:>6} {:>6.3}",
            p.bin_length,
            p.neighbor_bins,
            p.weight,
            cell.rmse().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
