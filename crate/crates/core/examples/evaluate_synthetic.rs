//! Score the constrained RoI against ground truth over a synthetic split and
//! print the per-class report.
//!
//! ```text
//! cargo run --release --example evaluate_synthetic
//! ```

use frustum_ffs::eval::{aggregate, evaluate_dataset, Baseline, EvalSettings, InMemoryDataset};
use frustum_ffs::ffs::HeuristicParams;
use frustum_ffs::kitti::ObjectClass;
use frustum_ffs::synth::{generate_frame, kitti_calibration, ObjectSpec, SceneSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() -> frustum_ffs::Result<()> {
    let calib = kitti_calibration();
    let mut rng = StdRng::seed_from_u64(42);
    let frames = (0..40)
        .map(|i| {
            let spec = SceneSpec {
                objects: vec![
                    ObjectSpec::new(ObjectClass::Car, rng.gen_range(-8.0..8.0), rng.gen_range(8.0..55.0), 300),
                    ObjectSpec::new(ObjectClass::Pedestrian, rng.gen_range(-5.0..5.0), rng.gen_range(6.0..35.0), 80),
                    ObjectSpec::new(ObjectClass::Cyclist, rng.gen_range(-6.0..6.0), rng.gen_range(6.0..40.0), 100),
                ],
                clutter_points: 4000,
                ground_points: 4000,
            };
            generate_frame(&format!("{i:06}"), &spec, &calib, &mut rng)
        })
        .collect::<frustum_ffs::Result<Vec<_>>>()?;
    let dataset = InMemoryDataset::new(frames);

    for (label, settings) in [
        ("ffs", EvalSettings::with_params(HeuristicParams::default())),
        (
            "ffs, weight 0.5",
            EvalSettings::with_params(HeuristicParams {
                weight: 0.5,
                ..HeuristicParams::default()
            }),
        ),
        (
            "gt-center",
            EvalSettings {
                baseline: Baseline::GtCenter,
                ..EvalSettings::with_params(HeuristicParams::default())
            },
        ),
    ] {
        let result = evaluate_dataset(&dataset, &settings, 4)?;
        let report = aggregate(&result.records);
        println!("{label}:");
        for g in report.per_class.iter().chain([&report.pedestrian_cyclist, &report.overall]) {
            println!(
                "  {:<20} n={:<4} rmse={:>6.3} m  contained={:.3}  reduction={:.3}",
                g.group,
                g.records,
                g.rmse.unwrap_or(f64::NAN),
                g.containment_rate_non_fallback.unwrap_or(f64::NAN),
                g.mean_reduction_ratio.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
