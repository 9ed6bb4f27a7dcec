//! Monte-Carlo check of planted-instant recovery under sensor noise.

use handover::data::grip_force;
use handover::features::{grip_release_time, loadshare_shift, transfer_time};
use handover::synth::{generate, GeneratorSpec};

#[test]
fn sigma_0_1_recovery_within_3_samples_on_95_percent_of_seeds() {
    let seeds = 1000u64;
    let mut hits = 0usize;
    for seed in 0..seeds {
        let spec = GeneratorSpec {
            sensor_noise_sigma_n: 0.1,
            seed,
            ..GeneratorSpec::default()
        };
        let (record, truth) = generate(&spec).unwrap();
        let forces = record.forces.as_ref().unwrap();
        let giver = grip_force(&forces.giver_grip).unwrap();
        let taker = grip_force(&forces.taker_grip).unwrap();
        let fy: Vec<f64> = forces.interaction.iter().map(|s| s.force.y).collect();

        let close = |got: usize, want: usize| (got as i64 - want as i64).abs() <= 3;
        let recovered = (|| -> Option<bool> {
            let times = transfer_time(&giver, &taker).ok()?;
            let gr = grip_release_time(&giver, times.t_tak_con).ok()?;
            let ld = loadshare_shift(&fy, times.t_tak_con, times.t_giv_rel).ok()?;
            Some(
                close(times.t_tak_con, truth.t_tak_con)
                    && close(times.t_giv_rel, truth.t_giv_rel)
                    && close(gr.t_rel_start, truth.t_rel_start)
                    && close(ld, truth.t_ld_shift),
            )
        })()
        .unwrap_or(false);
        hits += usize::from(recovered);
    }
    assert!(
        hits * 100 >= seeds as usize * 95,
        "recovered all instants on only {hits}/{seeds} seeds"
    );
}
