//! Time `run_ffs` per frustum on synthetic frames.
//!
//! ```text
//! cargo run --release --example bench_heuristic
//! ```

use frustum_ffs::eval::{bench, EvalSettings, InMemoryDataset};
use frustum_ffs::ffs::HeuristicParams;
use frustum_ffs::kitti::ObjectClass;
use frustum_ffs::synth::{generate_frame, kitti_calibration, ObjectSpec, SceneSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> frustum_ffs::Result<()> {
    let calib = kitti_calibration();
    let mut rng = StdRng::seed_from_u64(9);
    let frames = (0..10)
        .map(|i| {
            let spec = SceneSpec {
                objects: (0..4)
                    .map(|_| ObjectSpec::new(ObjectClass::Car, rng.gen_range(-10.0..10.0), rng.gen_range(8.0..60.0), 400))
                    .collect(),
                clutter_points: 60_000,
                ground_points: 60_000,
            };
            generate_frame(&format!("{i:06}"), &spec, &calib, &mut rng)
        })
        .collect::<frustum_ffs::Result<Vec<_>>>()?;

    let settings = EvalSettings::with_params(HeuristicParams::default());
    let t = bench(&InMemoryDataset::new(frames), &settings, 20)?;
    println!("{} frustums x {} repetitions", t.frustums, t.repetitions);
    println!("mean {:.1} us  median {:.1} us  p95 {:.1} us  max {:.1} us", t.mean_us, t.median_us, t.p95_us, t.max_us);
    println!(
        "{:.2e} frustum points/s, {:.2e} scanned points/s",
        t.points_per_second, t.scanned_points_per_second
    );
    Ok(())
}
