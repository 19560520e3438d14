use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scanvlp::channel::{received_power_on_axis, ChannelParams};
use scanvlp::estimator::{estimate_position, invert_distance, select_beam, EstimateStatus};
use scanvlp::geometry::{incidence_cosine, BeamGrid, ReceiverState, Room, Vec3};
use scanvlp::orientation::{normal_from_euler, EulerAngles};
use scanvlp::scan::{apply_timing_offset, default_pilot, hit_signal, realign_with_pilot, run_scan, ScanPlan};
use scanvlp::stats::EmpiricalCdf;

fn full_grid() -> Arc<BeamGrid> {
    static GRID: OnceLock<Arc<BeamGrid>> = OnceLock::new();
    GRID.get_or_init(|| Arc::new(BeamGrid::one_degree())).clone()
}

fn angle_deg(a: Vec3, b: Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn in_room_position() -> impl Strategy<Value = Vec3> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..2.5f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_survives_monotone_transforms(
        y in prop::collection::vec(-1e-3..1e-3f64, 1..200),
        scale in 1e-3..1e3f64,
        shift in -1.0..1.0f64,
    ) {
        let k = select_beam(&y).unwrap();
        let affine: Vec<f64> = y.iter().map(|v| v * scale + shift).collect();
        let cubed: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
        let max = y[k];
        // ties after rounding may move the index to another maximal sample
        let k_affine = select_beam(&affine).unwrap();
        prop_assert!(y[k_affine] == max || (affine[k_affine] - affine[k]).abs() <= 1e-15 * affine[k].abs().max(1.0));
        let k_cubed = select_beam(&cubed).unwrap();
        prop_assert!(y[k_cubed] == max || cubed[k_cubed] == cubed[k]);
    }

    #[test]
    fn distance_inversion_round_trips(d in 1e-6..=5.0f64, cos in 1e-6..=1.0f64) {
        let p = ChannelParams::default();
        let y = received_power_on_axis(d, cos, &p, 0.0);
        let (d_hat, status) = invert_distance(y, cos, &p).unwrap();
        prop_assert_eq!(status, EstimateStatus::Ok);
        prop_assert!((d_hat - d).abs() / d < 1e-9, "d {} -> {}", d, d_hat);
    }

    #[test]
    fn incidence_is_translation_invariant(
        pos in in_room_position(),
        t in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
        angles in (-180.0..180.0f64, -90.0..90.0f64, -180.0..180.0f64),
    ) {
        let tx = Vec3::new(0.5, 0.5, 3.0);
        let t = Vec3::new(t.0, t.1, t.2);
        let normal = normal_from_euler(EulerAngles { alpha_roll: angles.0, beta_pitch: angles.1, gamma_yaw: angles.2 });
        let rx = ReceiverState { position: pos, normal, fov_deg: 120.0 };
        let moved = ReceiverState { position: pos + t, ..rx };
        let a = incidence_cosine(tx, &rx).unwrap();
        let b = incidence_cosine(tx + t, &moved).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((normal.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_rows_are_monotone(sample in prop::collection::vec(0.0..10.0f64, 1..300)) {
        let cdf = EmpiricalCdf::new(sample).unwrap();
        let rows: Vec<_> = cdf.rows().collect();
        prop_assert!(rows.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        prop_assert_eq!(rows.last().unwrap().1, 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn realign_undoes_any_offset(pos in in_room_position(), seed: u64, frac in -1.0..1.0f64) {
        let grid = Arc::new(BeamGrid::build(30.0, 15.0).unwrap());
        let room = Room::default();
        let p = ChannelParams::default();
        let rx = ReceiverState::upright(pos, 120.0);
        let level = hit_signal(&room, &rx, &p).unwrap().max(1e-9) * 1e3;
        let pilot = default_pilot(64, level);
        let plan = ScanPlan::synchronized(grid.clone()).with_pilot(pilot.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trace = run_scan(&plan, &room, &rx, &p, 0.0, &mut rng).unwrap();
        let half = (trace.len() / 2) as f64;
        let offset = (frac * half).round() as i64;
        let realigned = realign_with_pilot(&apply_timing_offset(&trace, offset), &pilot).unwrap();
        prop_assert_eq!(realigned.offset_steps(), 0);
        prop_assert_eq!(realigned.samples(), trace.beam_samples());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_beam_is_near_the_true_direction(pos in in_room_position()) {
        let grid = full_grid();
        let room = Room::default();
        let p = ChannelParams::default();
        let rx = ReceiverState::upright(pos, 120.0);
        let plan = ScanPlan::synchronized(grid.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let trace = run_scan(&plan, &room, &rx, &p, 0.0, &mut rng).unwrap();
        let est = estimate_position(room.emitter_pos(), trace.samples(), &grid, &p, Vec3::UP, 0.0).unwrap();
        let dir = (pos - room.emitter_pos()).normalized().unwrap();
        let nearest = grid.directions().iter().map(|c| angle_deg(*c, dir)).fold(f64::INFINITY, f64::min);
        let chosen = angle_deg(grid.column(est.beam_index), dir);
        // cells are angle boxes, not nearest-center regions
        prop_assert!(chosen <= nearest + 0.5, "chosen {} nearest {}", chosen, nearest);
        prop_assert!(chosen <= 0.71);
    }

    #[test]
    fn high_snr_keeps_the_noiseless_beam(pos in in_room_position(), seed: u64) {
        let grid = full_grid();
        let room = Room::default();
        let p = ChannelParams::default();
        let rx = ReceiverState::upright(pos, 120.0);
        let signal = hit_signal(&room, &rx, &p).unwrap();
        let sigma = signal / 10f64.powf(60.0 / 20.0);
        let plan = ScanPlan::synchronized(grid.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trace = run_scan(&plan, &room, &rx, &p, sigma, &mut rng).unwrap();
        let k = select_beam(trace.samples()).unwrap();
        let cells = grid.cells_containing(pos - room.emitter_pos());
        prop_assert!(cells.contains(&k), "beam {} not in {:?}", k, cells);
    }
}
