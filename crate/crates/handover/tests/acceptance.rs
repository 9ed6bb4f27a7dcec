//! End-to-end acceptance suite. Each test covers one release criterion and
//! prints a single `ACCEPTANCE <name>: PASS` / `FAIL` line (visible with
//! `--nocapture`). Two dataset-backed checks are skipped unless
//! `HANDOVER_DATASET_DIR` points at the public recordings.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::Normal;

use handover::data::{grip_force, load_manifest, load_record};
use handover::features::stats::{one_way_anova, summarize, t_test};
use handover::features::{
    extract_features, grip_release_time, loadshare_shift, max_pull, transfer_time, FeatureSet,
    WeightCategory,
};
use handover::model::{
    backward, batch_loss, loss, make_windows, separable_windows, train, ForwardMode, GripWindow,
    Stage, TrainConfig, VaeLstmModel, HIDDEN_DIM, INPUT_DIM, LATENT_DIM, PARAM_COUNT,
    WINDOW_STEPS,
};
use handover::motion::{min_jerk_segment, plan_reach, TrajectoryProfile, MIN_JERK_PEAK_SPEED};
use handover::segmentation::{find_grip_intersections, SegmentationConfig};
use handover::signal::{butterworth_coeffs, FilterSpec};
use handover::strategy::{
    latency_audit, run_trace, Decision, Engine, EngineConfig, StrategyKind, TICK_BUDGET_MS,
};
use handover::synth::{benchmark, generate, generate_session, GeneratorSpec};
use handover::{GRAVITY, SAMPLE_RATE_HZ};

fn criterion<F: FnOnce()>(name: &str, body: F) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("ACCEPTANCE {name}: PASS"),
        Err(cause) => {
            println!("ACCEPTANCE {name}: FAIL");
            resume_unwind(cause);
        }
    }
}

fn random_window(rng: &mut ChaCha8Rng, label: u8) -> GripWindow {
    let w = rng.gen_range(0.8..2.0);
    let series = (0..WINDOW_STEPS)
        .map(|_| [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), w])
        .collect();
    GripWindow {
        series,
        t_e: -rng.gen_range(0..=215),
        label,
    }
}

fn accuracy(model: &VaeLstmModel, windows: &[GripWindow]) -> f64 {
    let correct = windows
        .iter()
        .filter(|w| {
            let p = model.forward(w, ForwardMode::Eval).unwrap().p;
            u8::from(p >= 0.5) == w.label
        })
        .count();
    correct as f64 / windows.len() as f64
}

#[test]
fn gradient_correctness() {
    criterion("gradient-correctness", || {
        let started = Instant::now();
        let h4 = 4 * HIDDEN_DIM;
        let groups: [(&str, usize); 12] = [
            ("enc_wih", h4 * INPUT_DIM),
            ("enc_whh", h4 * HIDDEN_DIM),
            ("enc_b", h4),
            ("mu_w", LATENT_DIM * HIDDEN_DIM),
            ("mu_b", LATENT_DIM),
            ("lv_w", LATENT_DIM * HIDDEN_DIM),
            ("lv_b", LATENT_DIM),
            ("dec_wih", h4 * LATENT_DIM),
            ("dec_whh", h4 * HIDDEN_DIM),
            ("dec_b", h4),
            ("out_w", HIDDEN_DIM),
            ("out_b", 1),
        ];
        assert_eq!(groups.iter().map(|g| g.1).sum::<usize>(), PARAM_COUNT);

        let h = 1e-5;
        for seed in [11u64, 12, 13] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = VaeLstmModel::random(seed);
            let windows = vec![random_window(&mut rng, 0), random_window(&mut rng, 1)];
            let eps: Vec<Vec<f64>> = (0..windows.len())
                .map(|_| (0..LATENT_DIM).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let analytic = backward(&model, &windows, &eps).unwrap().grads;

            let mut offset = 0usize;
            for (name, len) in groups {
                let mut worst = 0.0f64;
                for k in offset..offset + len {
                    let mut plus = model.clone();
                    plus.params[k] += h;
                    let mut minus = model.clone();
                    minus.params[k] -= h;
                    let (_, _, lp) = batch_loss(&plus, &windows, &eps).unwrap();
                    let (_, _, lm) = batch_loss(&minus, &windows, &eps).unwrap();
                    let fd = (lp - lm) / (2.0 * h);
                    let denom = fd.abs().max(analytic[k].abs()).max(1e-5);
                    worst = worst.max((analytic[k] - fd).abs() / denom);
                }
                assert!(
                    worst < 1e-4,
                    "seed {seed} group {name}: max relative error {worst:e}"
                );
                offset += len;
            }
        }
        assert!(
            started.elapsed().as_secs_f64() < 30.0,
            "gradient check took {:?}",
            started.elapsed()
        );
    });
}

#[test]
fn loss_identities() {
    criterion("loss-identities", || {
        let zeros = vec![0.0; LATENT_DIM];
        for label in [0u8, 1] {
            let (recon, kl, total) = loss(0.5, label, &zeros, &zeros);
            assert!((recon - std::f64::consts::LN_2).abs() < 1e-12);
            assert_eq!(kl, 0.0);
            assert!((total - recon).abs() < 1e-15);
        }
        let ones = vec![1.0; LATENT_DIM];
        let (_, kl, _) = loss(0.5, 1, &ones, &zeros);
        assert!((kl - 5.0).abs() < 1e-12, "unit-mean KL {kl}");
    });
}

#[test]
fn training_sanity() {
    criterion("training-sanity", || {
        let dataset = separable_windows(400, 5);
        let config = TrainConfig::default();
        assert_eq!(config.batch_size, 100);
        assert_eq!(config.learning_rate, 0.01);
        assert_eq!(config.max_epochs, 100);

        let out = train(&dataset, &config, None).unwrap();
        let held_out: Vec<GripWindow> =
            out.test_indices.iter().map(|&i| dataset[i].clone()).collect();
        let acc = accuracy(&out.model, &held_out);
        assert!(acc >= 0.95, "held-out accuracy {acc}");

        // Label-shuffled control: no signal left to learn.
        let mut labels: Vec<u8> = dataset.iter().map(|w| w.label).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(33));
        let shuffled: Vec<GripWindow> = dataset
            .iter()
            .cloned()
            .zip(labels)
            .map(|(mut w, label)| {
                w.label = label;
                w
            })
            .collect();
        let control_config = TrainConfig {
            max_epochs: 15,
            ..TrainConfig::default()
        };
        let control = train(&shuffled, &control_config, None).unwrap();
        let control_test: Vec<GripWindow> = control
            .test_indices
            .iter()
            .map(|&i| shuffled[i].clone())
            .collect();
        let control_acc = accuracy(&control.model, &control_test);
        assert!(
            (control_acc - 0.5).abs() <= 0.05,
            "shuffled-label accuracy {control_acc}"
        );
    });
}

#[test]
fn segmentation_oracle() {
    criterion("segmentation-oracle", || {
        let started = Instant::now();
        let cfg = SegmentationConfig::default();
        let sessions = 1000usize;
        let mut hits = 0usize;
        let mut false_positives = 0usize;
        for i in 0..sessions {
            let release_start_ms = -150.0 - 20.0 * (i % 5) as f64;
            let spec = GeneratorSpec {
                weight_kg: 0.1 + 1.9 * (i % 97) as f64 / 96.0,
                contact_time_ms: -300.0 - 15.0 * (i % 7) as f64,
                release_start_ms,
                loadshare_crossing_ms: release_start_ms + 120.0,
                seed: i as u64,
                ..GeneratorSpec::default()
            };
            let center = 500 + (i * 37) % 1000;
            let (session, truth) = generate_session(&spec, 2000, center).unwrap();
            let forces = session.forces.as_ref().unwrap();
            let giver = grip_force(&forces.giver_grip).unwrap();
            let taker = grip_force(&forces.taker_grip).unwrap();
            let found = find_grip_intersections(&giver, &taker, &cfg).unwrap();
            let mut recovered = false;
            for b in &found {
                if (b.center_index as i64 - truth.center_index as i64).abs() <= 1 {
                    recovered = true;
                } else {
                    false_positives += 1;
                }
            }
            hits += usize::from(recovered);
        }
        assert_eq!(false_positives, 0, "{false_positives} spurious boundaries");
        assert!(hits * 100 >= sessions * 99, "recovered {hits}/{sessions}");
        assert!(
            started.elapsed().as_secs_f64() < 60.0,
            "segmentation oracle took {:?}",
            started.elapsed()
        );
    });
}

#[test]
fn feature_recovery() {
    criterion("feature-recovery", || {
        let close = |a: usize, b: usize| (a as i64 - b as i64).abs() <= 1;
        let mut checked = 0usize;
        for &weight_kg in &[0.05, 0.3, 0.8, 1.18, 1.9] {
            for &(contact_time_ms, release_start_ms) in
                &[(-350.0, -150.0), (-280.0, -100.0), (-400.0, -200.0)]
            {
                for &pull_peak_n in &[4.0, 8.0] {
                    let spec = GeneratorSpec {
                        weight_kg,
                        contact_time_ms,
                        release_start_ms,
                        pull_peak_n,
                        loadshare_crossing_ms: release_start_ms + 100.0,
                        ..GeneratorSpec::default()
                    };
                    let (record, truth) = generate(&spec).unwrap();
                    let forces = record.forces.as_ref().unwrap();
                    let giver = grip_force(&forces.giver_grip).unwrap();
                    let taker = grip_force(&forces.taker_grip).unwrap();

                    let times = transfer_time(&giver, &taker).unwrap();
                    assert!(close(times.t_tak_con, truth.t_tak_con), "{spec:?}");
                    assert!(close(times.t_giv_rel, truth.t_giv_rel), "{spec:?}");
                    let t_tf = times.t_giv_rel - times.t_tak_con;
                    let t_tf_truth = truth.t_giv_rel - truth.t_tak_con;
                    assert!(close(t_tf, t_tf_truth), "t_tf {t_tf} vs {t_tf_truth}");

                    let gr = grip_release_time(&giver, times.t_tak_con).unwrap();
                    assert!(close(gr.t_rel_start, truth.t_rel_start), "{spec:?}");
                    let t_gr = gr.t_giv_rel - gr.t_rel_start;
                    let t_gr_truth = truth.t_giv_rel - truth.t_rel_start;
                    assert!(close(t_gr, t_gr_truth), "t_gr {t_gr} vs {t_gr_truth}");

                    let fz: Vec<f64> = forces.interaction.iter().map(|s| s.force.z).collect();
                    let fy: Vec<f64> = forces.interaction.iter().map(|s| s.force.y).collect();
                    let pull = max_pull(&fz, times.t_tak_con, times.t_giv_rel).unwrap();
                    assert!(
                        (pull - truth.max_pull_n).abs() < 1e-6,
                        "max_pull {pull} vs {}",
                        truth.max_pull_n
                    );
                    let ld = loadshare_shift(&fy, times.t_tak_con, times.t_giv_rel).unwrap();
                    assert!(close(ld, truth.t_ld_shift), "{spec:?}");
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 30);
    });
}

#[test]
fn filter_correctness() {
    criterion("filter-correctness", || {
        let spec = FilterSpec {
            order: 4,
            cutoff_hz: 5.0,
            sample_rate_hz: 120.0,
        };
        let coeffs = butterworth_coeffs(&spec).unwrap();
        let mag_db = |f: f64| 20.0 * coeffs.response(f, spec.sample_rate_hz).norm().log10();
        assert!((mag_db(5.0) + 3.01).abs() < 0.05, "cutoff gain {} dB", mag_db(5.0));
        let dc = coeffs.response(0.0, spec.sample_rate_hz).norm();
        assert!((dc - 1.0).abs() < 1e-12, "DC gain {dc}");
        assert!(mag_db(30.0) < -60.0, "stopband gain {} dB", mag_db(30.0));
    });
}

#[test]
fn min_jerk_analytics() {
    criterion("min-jerk-analytics", || {
        use handover::data::Vec3;
        // Midpoint lands on a sample for these durations at 120 Hz, so the
        // sampled peak is the analytic peak.
        for &duration_s in &[0.5, 1.0, 2.0] {
            let start = Vec3::new(0.1, -0.2, 1.0);
            let end = Vec3::new(0.7, 0.1, 1.3);
            let d = end.sub(start).norm();
            let traj = min_jerk_segment(start, end, duration_s, SAMPLE_RATE_HZ).unwrap();
            let peak = MIN_JERK_PEAK_SPEED * d / duration_s;
            assert!(
                (traj.max_speed() - peak).abs() < 1e-6,
                "peak speed {} vs {peak}",
                traj.max_speed()
            );
            for idx in [0, traj.len() - 1] {
                assert!(traj.velocity[idx].norm() < 1e-9);
                assert!(traj.acceleration[idx].norm() < 1e-9);
            }
        }

        let waypoints = [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.9, -0.4, 1.4),
            Vec3::new(1.6, 0.2, 1.1),
        ];
        for category in [WeightCategory::Low, WeightCategory::Moderate, WeightCategory::High] {
            let plan = plan_reach(&waypoints, category, SAMPLE_RATE_HZ).unwrap();
            let cap = TrajectoryProfile::for_category(category).max_accel_cap;
            let max_accel = plan.trajectory.max_accel();
            assert!(
                max_accel <= cap * 1.005,
                "{category:?}: {max_accel} exceeds cap {cap}"
            );
        }
    });
}

#[test]
fn strategy_semantics() {
    criterion("strategy-semantics", || {
        // GR 2.0 routes light objects to the pull rule, tick for tick.
        let model = VaeLstmModel::random(3);
        for &weight_kg in &[0.05, 0.2, 0.45, 0.79] {
            for &pull_peak_n in &[2.5, 5.0, 9.0] {
                let (record, _) = generate(&GeneratorSpec {
                    weight_kg,
                    pull_peak_n,
                    ..GeneratorSpec::default()
                })
                .unwrap();
                let cfg = EngineConfig::default();
                let gr2 = run_trace(&StrategyKind::gr2(model.clone()), &record, cfg).unwrap();
                let pull = run_trace(&StrategyKind::pull_force(), &record, cfg).unwrap();
                assert_eq!(gr2.release_tick, pull.release_tick, "w {weight_kg}");
                for (a, b) in gr2.ticks.iter().zip(&pull.ticks) {
                    assert_eq!(a.decision, b.decision);
                }
            }
        }

        // LoadShare fires when the giver's vertical load drops below half the
        // weight force, i.e. at the planted load-share shift.
        for &weight_kg in &[0.5, 0.9, 1.5] {
            for &loadshare_crossing_ms in &[20.0, 50.0, 90.0] {
                let (record, truth) = generate(&GeneratorSpec {
                    weight_kg,
                    loadshare_crossing_ms,
                    ..GeneratorSpec::default()
                })
                .unwrap();
                let trace =
                    run_trace(&StrategyKind::load_share(), &record, EngineConfig::default())
                        .unwrap();
                let tick = trace.release_tick.expect("load share must trigger") as i64;
                assert!(
                    (tick - truth.t_ld_shift as i64).abs() <= 1,
                    "w {weight_kg}: released {tick}, planted {}",
                    truth.t_ld_shift
                );
                let threshold = 0.5 * weight_kg * GRAVITY;
                let at_release = &trace.ticks[tick as usize];
                let giver_load = threshold - at_release.fy;
                assert!(giver_load < threshold, "giver load {giver_load}");
            }
        }

        // Release latches: 1e5 fuzzed traces never flip back to hold.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..100_000usize {
            let kind = if i % 2 == 0 {
                StrategyKind::pull_force()
            } else {
                StrategyKind::load_share()
            };
            let mut engine =
                Engine::new(kind, rng.gen_range(0.05..2.0), EngineConfig::default()).unwrap();
            let mut released = false;
            for _ in 0..30 {
                let out = engine
                    .step(rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0))
                    .unwrap();
                if released {
                    assert_eq!(out.decision, Decision::Release);
                }
                released |= out.decision == Decision::Release;
            }
        }
        for seed in 0..40u64 {
            let mut engine = Engine::new(
                StrategyKind::gr2(VaeLstmModel::random(seed)),
                1.2,
                EngineConfig::default(),
            )
            .unwrap();
            let mut released = false;
            for _ in 0..150 {
                let out = engine
                    .step(rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0))
                    .unwrap();
                if released {
                    assert_eq!(out.decision, Decision::Release);
                }
                released |= out.decision == Decision::Release;
            }
        }
    });
}

#[test]
fn latency_budget() {
    criterion("latency-budget", || {
        let (record, _) = generate(&GeneratorSpec {
            weight_kg: 1.3,
            ..GeneratorSpec::default()
        })
        .unwrap();
        // Bias the output head towards hold so every one of the 800 ticks
        // pays the full classifier cost.
        let mut model = VaeLstmModel::random(2);
        model.params[PARAM_COUNT - 1] = -60.0;
        // Wall-clock measurement: keep each tick's fastest time over several
        // runs so scheduler preemption from tests on sibling cores cannot
        // fail the budget check.
        let kind = StrategyKind::gr2(model);
        let mut per_tick_us = vec![f64::INFINITY; 800];
        for _ in 0..5 {
            let trace = run_trace(&kind, &record, EngineConfig::default()).unwrap();
            assert_eq!(trace.ticks.len(), 800);
            assert!(trace.release_tick.is_none());
            assert!(latency_audit(&trace, TICK_BUDGET_MS).budget_ms == TICK_BUDGET_MS);
            for (best, tick) in per_tick_us.iter_mut().zip(&trace.ticks) {
                *best = best.min(tick.compute_time_us);
            }
        }
        let max_ms = per_tick_us.iter().fold(0.0f64, |a, &b| a.max(b)) / 1000.0;
        assert!(
            max_ms < TICK_BUDGET_MS,
            "max {max_ms} ms over {TICK_BUDGET_MS} ms budget"
        );
    });
}

fn normal_draws(rng: &mut ChaCha8Rng, n: usize, mean: f64) -> Vec<f64> {
    use rand::distributions::Distribution;
    let dist = Normal::new(mean, 1.0).unwrap();
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Two-sided permutation p for the Welch statistic, with the observed
/// assignment counted once (the standard add-one estimator).
fn permutation_t_p(xs: &[f64], ys: &[f64], n_perm: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (t_obs, _) = t_test(xs, ys, false).unwrap();
    let mut pool: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let nx = xs.len();
    let mut extreme = 0usize;
    for _ in 0..n_perm {
        pool.shuffle(rng);
        let (t, _) = t_test(&pool[..nx], &pool[nx..], false).unwrap();
        if t.abs() >= t_obs.abs() - 1e-12 {
            extreme += 1;
        }
    }
    (extreme + 1) as f64 / (n_perm + 1) as f64
}

fn permutation_f_p(groups: &[Vec<f64>], n_perm: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (f_obs, _) = one_way_anova(groups).unwrap();
    let mut pool: Vec<f64> = groups.iter().flatten().copied().collect();
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let mut extreme = 0usize;
    for _ in 0..n_perm {
        pool.shuffle(rng);
        let mut start = 0usize;
        let shuffled: Vec<Vec<f64>> = sizes
            .iter()
            .map(|&n| {
                let g = pool[start..start + n].to_vec();
                start += n;
                g
            })
            .collect();
        let (f, _) = one_way_anova(&shuffled).unwrap();
        if f >= f_obs - 1e-12 {
            extreme += 1;
        }
    }
    (extreme + 1) as f64 / (n_perm + 1) as f64
}

#[test]
fn statistics_oracles() {
    criterion("statistics-oracles", || {
        // Hand-computed cases. Groups with means 2/4/6 and unit within-group
        // variance: SSB = 24 (MSB 12), SSW = 6 (MSW 1), F = 12.
        let groups = vec![
            vec![1.0, 2.0, 3.0],
            vec![3.0, 4.0, 5.0],
            vec![5.0, 6.0, 7.0],
        ];
        let (f, _) = one_way_anova(&groups).unwrap();
        assert!((f - 12.0).abs() < 1e-6, "F {f}");

        // Paired differences 2,4,3,5,1: mean 3, sd sqrt(2.5), t = 3/sqrt(0.5).
        let pre = [10.0, 11.0, 12.0, 13.0, 14.0];
        let post = [12.0, 15.0, 15.0, 18.0, 15.0];
        let (t_paired, _) = t_test(&post, &pre, true).unwrap();
        assert!((t_paired - 3.0 / 0.5f64.sqrt()).abs() < 1e-6, "t {t_paired}");

        // Welch: means 20 and 15, variances 8/3 (n 4) and 9 (n 3).
        let xs = [18.0, 20.0, 20.0, 22.0];
        let ys = [12.0, 15.0, 18.0];
        let (t_welch, _) = t_test(&xs, &ys, false).unwrap();
        let expected = 5.0 / (8.0_f64 / 3.0 / 4.0 + 9.0 / 3.0).sqrt();
        assert!((t_welch - expected).abs() < 1e-6, "t {t_welch}");

        // Analytic p values against 100k-permutation oracles on 20 random
        // datasets; each must land inside the oracle's 99% Monte-Carlo band.
        let n_perm = 100_000usize;
        let z99 = 2.5758;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let shifts = [0.0, 0.0, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.1, 0.2, 0.3];
        for (i, &shift) in shifts.iter().enumerate() {
            let xs = normal_draws(&mut rng, 40, 0.0);
            let ys = normal_draws(&mut rng, 40, shift);
            let (_, p_analytic) = t_test(&xs, &ys, false).unwrap();
            let p_hat = permutation_t_p(&xs, &ys, n_perm, &mut rng);
            let half = z99 * (p_hat * (1.0 - p_hat) / n_perm as f64).sqrt() + 1.0 / n_perm as f64;
            assert!(
                (p_analytic - p_hat).abs() <= half,
                "t dataset {i}: analytic {p_analytic}, permutation {p_hat} +/- {half}"
            );
        }
        for (i, &shift) in [0.0, 0.1, 0.2, 0.3, 0.15, 0.25].iter().enumerate() {
            let groups = vec![
                normal_draws(&mut rng, 30, 0.0),
                normal_draws(&mut rng, 30, shift),
                normal_draws(&mut rng, 30, -shift),
            ];
            let (_, p_analytic) = one_way_anova(&groups).unwrap();
            let p_hat = permutation_f_p(&groups, n_perm, &mut rng);
            let half = z99 * (p_hat * (1.0 - p_hat) / n_perm as f64).sqrt() + 1.0 / n_perm as f64;
            assert!(
                (p_analytic - p_hat).abs() <= half,
                "anova dataset {i}: analytic {p_analytic}, permutation {p_hat} +/- {half}"
            );
        }
    });
}

#[test]
fn benchmark_accounting() {
    criterion("benchmark-accounting", || {
        let strategies = vec![StrategyKind::load_share(), StrategyKind::pull_force()];
        let corpus: Vec<_> = (0..12)
            .map(|i| {
                generate(&GeneratorSpec {
                    weight_kg: 0.3 + 0.12 * i as f64,
                    // Half the corpus never crosses the 4 N pull threshold.
                    pull_peak_n: if i % 2 == 0 { 6.0 } else { 3.0 },
                    seed: i as u64,
                    ..GeneratorSpec::default()
                })
                .unwrap()
                .0
            })
            .collect();
        let report = benchmark(&strategies, &corpus, EngineConfig::default()).unwrap();
        let fastest: usize = report.strategies.iter().map(|s| s.fastest_count).sum();
        assert_eq!(fastest, report.corpus_size - report.never_triggered);
    });
}

fn dataset_dir() -> Option<PathBuf> {
    std::env::var_os("HANDOVER_DATASET_DIR").map(PathBuf::from)
}

fn dataset_features(dir: &PathBuf) -> Vec<(FeatureSet, handover::data::HandoverRecord)> {
    let manifest = load_manifest(&dir.join("manifest.json")).unwrap();
    manifest
        .entries
        .iter()
        .map(|e| {
            let record = load_record(&dir.join(&e.path)).unwrap();
            (extract_features(&record).unwrap(), record)
        })
        .collect()
}

#[test]
fn dataset_reproduction() {
    let Some(dir) = dataset_dir() else {
        println!("ACCEPTANCE dataset-reproduction: SKIP (HANDOVER_DATASET_DIR not set)");
        return;
    };
    criterion("dataset-reproduction", || {
        let sets: Vec<FeatureSet> = dataset_features(&dir).into_iter().map(|p| p.0).collect();
        let stats = summarize(&sets);
        let group_mean = |category: WeightCategory, metric: &str| -> f64 {
            stats
                .groups
                .iter()
                .find(|g| g.category == category)
                .and_then(|g| g.means.iter().find(|m| m.metric == metric))
                .unwrap_or_else(|| panic!("no {metric} mean for {category:?}"))
                .mean
        };
        let low_avg_v = group_mean(WeightCategory::Low, "avg_velocity");
        assert!((low_avg_v - 2.023).abs() <= 0.02 * 2.023, "Low avg_velocity {low_avg_v}");
        let high_max_a = group_mean(WeightCategory::High, "max_acceleration");
        assert!(
            (high_max_a - 32.951).abs() <= 0.02 * 32.951,
            "High max_acceleration {high_max_a}"
        );
        let corr = |metric: &str| -> f64 {
            stats
                .weight_correlations
                .iter()
                .find(|c| c.metric == metric)
                .unwrap_or_else(|| panic!("no weight correlation for {metric}"))
                .r
        };
        assert!((corr("avg_acceleration") + 0.6033).abs() <= 0.05);
        assert!((corr("avg_velocity") + 0.4736).abs() <= 0.05);
    });
}

#[test]
fn dataset_two_stage_training() {
    let Some(dir) = dataset_dir() else {
        println!("ACCEPTANCE dataset-two-stage: SKIP (HANDOVER_DATASET_DIR not set)");
        return;
    };
    criterion("dataset-two-stage", || {
        // Stage 1: pretrain on generator windows.
        let mut pretrain = Vec::new();
        for i in 0..10u64 {
            let (record, truth) = generate(&GeneratorSpec {
                weight_kg: 0.9 + 0.1 * i as f64,
                sensor_noise_sigma_n: 0.05,
                seed: i,
                ..GeneratorSpec::default()
            })
            .unwrap();
            pretrain.extend(
                make_windows(&record, truth.t_rel_start)
                    .unwrap()
                    .into_iter()
                    .step_by(3),
            );
        }
        let stage1 = train(
            &pretrain,
            &TrainConfig {
                max_epochs: 30,
                ..TrainConfig::default()
            },
            None,
        )
        .unwrap();

        // Stage 2: finetune on the recorded handovers.
        let mut windows = Vec::new();
        for (_, record) in dataset_features(&dir) {
            let Some(forces) = &record.forces else { continue };
            let giver = grip_force(&forces.giver_grip).unwrap();
            let taker = grip_force(&forces.taker_grip).unwrap();
            let Ok(times) = transfer_time(&giver, &taker) else { continue };
            let Ok(gr) = grip_release_time(&giver, times.t_tak_con) else { continue };
            windows.extend(make_windows(&record, gr.t_rel_start).unwrap());
        }
        let stage2 = train(
            &windows,
            &TrainConfig {
                stage: Stage::Finetune,
                learning_rate: 0.001,
                ..TrainConfig::default()
            },
            Some(&stage1.model),
        )
        .unwrap();
        let held_out: Vec<GripWindow> = stage2
            .test_indices
            .iter()
            .map(|&i| windows[i].clone())
            .collect();
        let acc = accuracy(&stage2.model, &held_out);
        assert!(acc > 0.8, "two-stage held-out accuracy {acc}");
    });
}
