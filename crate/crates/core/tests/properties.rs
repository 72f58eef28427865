//! Property tests for the invariants of each module.

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use las_core::analysis::{kmeans, qq_table};
use las_core::metrics::{active_count, engagement, mann_whitney_u, normal_approximation_p, MinuteWindow};
use las_core::nn::{normalize, soft_update, Activation, Architecture, DenseNet};
use las_core::pb::{default_params, ActivationEvent, Param, PbEngine};
use las_core::pla::{reward, ReplayBuffer, Transition};
use las_core::sculpture::{
    scale_distance_to_reading, ActuatorEnvelope, ActuatorKind, IrFrame, IrSensorModel, NodeTopology, SculptureState,
    VisitorBody, TICK_S,
};
use las_core::visitors::{oracle_reward, SimplifiedEnv};

fn window(frames: Vec<Vec<f64>>) -> MinuteWindow {
    MinuteWindow {
        minute_start: 0.0,
        frames: frames.into_iter().enumerate().map(|(k, r)| IrFrame { timestamp: k as f64 * 0.1, readings: r }).collect(),
        sample_rate: 10.0,
    }
}

fn frames_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 24), 1..80)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn readings_stay_in_unit_range(
        seed in any::<u64>(),
        noise in 0.0f64..0.3,
        baseline in -0.2f64..0.2,
        people in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..150.0), 0..6),
    ) {
        let topology = NodeTopology::canonical();
        let n = topology.node_count();
        let sensors = IrSensorModel { half_angle_deg: 30.0, baseline: vec![baseline; n], noise_std: noise };
        let mut state = SculptureState::with_sensors(topology.clone(), sensors, seed);
        let (xs, ys): (Vec<f64>, Vec<f64>) = topology.positions().iter().map(|p| (p[0], p[1])).unzip();
        let span = |v: &[f64]| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let ((x0, x1), (y0, y1)) = (span(&xs), span(&ys));
        for (i, (fx, fy, clearance)) in people.into_iter().enumerate() {
            state.visitors_mut().push(VisitorBody {
                id: i as u64,
                position: [x0 + fx * (x1 - x0), y0 + fy * (y1 - y0)],
                clearance_cm: clearance,
            });
        }
        for _ in 0..20 {
            let frame = state.read_ir_frame();
            prop_assert_eq!(frame.readings.len(), n);
            prop_assert!(frame.readings.iter().all(|r| (0.0..=1.0).contains(r)));
            state.step(TICK_S);
        }
    }

    #[test]
    fn envelope_is_lipschitz_within_phases(
        up in 0.05f64..10.0,
        hold in 0.0f64..10.0,
        down in 0.05f64..10.0,
        peak in 0.0f64..=1.0,
        t in 0.0f64..30.0,
        dt in 0.0f64..0.5,
    ) {
        let env = ActuatorEnvelope::ramp(ActuatorKind::Led, 0.0, up, hold, down, peak).unwrap();
        let slope = peak * (1.0 / up).max(1.0 / down);
        let change = (env.intensity(t + dt) - env.intensity(t)).abs();
        prop_assert!(change <= slope * dt + 1e-12, "change {change} over {dt}");
    }

    #[test]
    fn envelope_steps_compose(up in 0.1f64..5.0, hold in 0.0f64..5.0, down in 0.1f64..5.0, k in 0u32..200) {
        let env = ActuatorEnvelope::ramp(ActuatorKind::Moth, 0.0, up, hold, down, 1.0).unwrap();
        let topology = NodeTopology::canonical();
        let mut fine = SculptureState::new(topology.clone(), 1);
        let mut coarse = SculptureState::new(topology, 1);
        fine.activate(0, 0, env).unwrap();
        coarse.activate(0, 0, env).unwrap();
        for _ in 0..k {
            fine.step(TICK_S);
            fine.step(TICK_S);
            coarse.step(2.0 * TICK_S);
        }
        let a = fine.intensity(0, ActuatorKind::Moth, 0);
        let b = coarse.intensity(0, ActuatorKind::Moth, 0);
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }

    #[test]
    fn distance_scale_is_monotone(a in 0.1f64..200.0, b in 0.1f64..200.0) {
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(scale_distance_to_reading(near).unwrap() >= scale_distance_to_reading(far).unwrap());
    }

    #[test]
    fn sensor_frames_replay_bit_identically(seed in any::<u64>(), x in 0.0f64..3.0) {
        let make = || {
            let topology = NodeTopology::canonical();
            let n = topology.node_count();
            let sensors = IrSensorModel { half_angle_deg: 30.0, baseline: vec![0.0; n], noise_std: 0.05 };
            let mut s = SculptureState::with_sensors(topology, sensors, seed);
            s.visitors_mut().push(VisitorBody { id: 0, position: [x, 0.5], clearance_cm: 20.0 });
            (0..10).map(|_| { let f = s.read_ir_frame(); s.step(TICK_S); f }).collect::<Vec<_>>()
        };
        let (a, b) = (make(), make());
        for (fa, fb) in a.iter().zip(&b) {
            prop_assert!(fa.readings.iter().zip(&fb.readings).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cascade_times_are_affine_in_distance(trigger in 0usize..24, gap in 0.0f64..5.0, seed in any::<u64>()) {
        let topology = NodeTopology::canonical();
        let mut params = default_params();
        params.set(Param::TGapN, gap);
        let mut engine = PbEngine::new(topology.clone(), &params, seed, 0.0);
        let t0 = 1.0;
        let mut log = Vec::new();
        for k in 0..=((t0 + 8.0 * gap + 1.0) / TICK_S).ceil() as u64 {
            let t = k as f64 * TICK_S;
            let mut frame = IrFrame::zeros(t, 24);
            if (t - t0).abs() < 1e-9 {
                frame.readings[trigger] = 1.0;
            }
            log.extend(engine.tick(&params, &frame, t).unwrap());
        }
        let distance = topology.distances_from(trigger);
        for node in 0..24 {
            let moths: Vec<_> = log
                .iter()
                .filter(|a| a.node == node && a.actuator() == ActuatorKind::Moth)
                .filter(|a| matches!(a.event, ActivationEvent::Trigger | ActivationEvent::Cascade))
                .collect();
            prop_assert_eq!(moths.len(), 1);
            let want = t0 + distance[node].unwrap() as f64 * gap;
            prop_assert!((moths[0].t - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn activation_logs_replay_bit_identically(seed in any::<u64>(), pattern in prop::collection::vec(0usize..24, 1..6)) {
        let params = default_params();
        let run = || {
            let mut engine = PbEngine::new(NodeTopology::canonical(), &params, seed, 0.0);
            let mut log = Vec::new();
            for k in 0..600u64 {
                let t = k as f64 * TICK_S;
                let mut frame = IrFrame::zeros(t, 24);
                if k % 97 == 5 {
                    frame.readings[pattern[(k as usize) % pattern.len()]] = 0.9;
                }
                log.extend(engine.tick(&params, &frame, t).unwrap());
            }
            format!("{log:?}")
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn scheduled_times_never_precede_now(seed in any::<u64>()) {
        let params = default_params();
        let mut engine = PbEngine::new(NodeTopology::canonical(), &params, seed, 0.0);
        for k in 0..3000u64 {
            let t = k as f64 * TICK_S;
            let mut frame = IrFrame::zeros(t, 24);
            if k % 400 == 7 {
                frame.readings[(k as usize / 400) % 24] = 1.0;
            }
            for a in engine.tick(&params, &frame, t).unwrap() {
                prop_assert!(a.t >= t - 1e-9, "activation at {} scheduled at {t}", a.t);
            }
        }
    }

    #[test]
    fn validation_rejects_out_of_range(index in 0usize..17, above in any::<bool>(), by in 1e-6f64..10.0) {
        let param = Param::ALL[index];
        let (lo, hi) = param.accepted_range();
        let mut p = default_params();
        p.set(param, if above { hi + by } else { lo - by });
        prop_assert!(p.validate().is_err());
    }
}

#[test]
fn background_rate_matches_probability() {
    let mut params = default_params();
    params.p = 0.3;
    params.t_w = 1.0;
    params.t_bg_min = 1.0;
    params.t_bg_max = 1.0;
    let mut engine = PbEngine::new(NodeTopology::canonical(), &params, 99, 0.0);
    let entry = engine.state().background_deadline();
    let horizon = 40_000u64;
    let mut lights = 0usize;
    for k in 0..horizon {
        let t = k as f64 * TICK_S;
        for a in engine.tick(&params, &IrFrame::zeros(t, 24), t).unwrap() {
            if a.event == ActivationEvent::Background && a.actuator() != ActuatorKind::Sma {
                lights += 1;
            }
        }
    }
    let last = (horizon - 1) as f64 * TICK_S;
    let slots = ((last - entry) / params.t_w + 1e-9).floor();
    let candidates = slots * 48.0;
    let rate = lights as f64 / candidates;
    let se: f64 = (0.3 * 0.7 / candidates).sqrt();
    assert!((rate - 0.3).abs() <= 3.0 * se, "rate {rate} over {slots} slots, se {se}");
}

fn small_net(seed: u64) -> DenseNet {
    let arch = Architecture::mlp(3, &[5, 4], 2, Activation::Tanh).unwrap();
    DenseNet::random(arch, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn layer_norm_standardizes(values in prop::collection::vec(-50.0f64..50.0, 2..64)) {
        let spread = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) - values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-1);
        let out = normalize(&values);
        let n = out.len() as f64;
        let mean = out.iter().sum::<f64>() / n;
        let var = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let raw_mean = values.iter().sum::<f64>() / n;
        let raw_var = values.iter().map(|v| (v - raw_mean) * (v - raw_mean)).sum::<f64>() / n;
        let expected_var = raw_var / (raw_var + las_core::nn::LAYER_NORM_EPS);
        prop_assert!(mean.abs() <= 1e-10);
        prop_assert!((var - expected_var).abs() <= 1e-10);
        prop_assert!((var - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn soft_update_contracts_geometrically(seed in any::<u64>(), tau in 0.0f64..=1.0, k in 1usize..30) {
        let live = small_net(seed);
        let mut target = small_net(seed.wrapping_add(1));
        let dist = |a: &DenseNet, b: &DenseNet| a.params().iter().zip(b.params()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let start = dist(&target, &live);
        for _ in 0..k {
            soft_update(&mut target, &live, tau).unwrap();
        }
        let expected = (1.0 - tau).powi(k as i32) * start;
        prop_assert!((dist(&target, &live) - expected).abs() <= 1e-12 * start.max(1.0));
    }

    #[test]
    fn forward_is_deterministic(seed in any::<u64>(), input in prop::collection::vec(-3.0f64..3.0, 3)) {
        let net = small_net(seed);
        let a = net.forward(&input).unwrap();
        let b = net.clone().forward(&input).unwrap();
        let batch = net.forward_batch(Array2::from_shape_vec((1, 3), input.clone()).unwrap().view()).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert!(a.iter().zip(batch.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn reward_is_bounded_and_monotone(obs in prop::collection::vec(0.0f64..=1.0, 24), i in 0usize..24, bump in 0.0f64..=1.0) {
        let r = reward(&obs);
        prop_assert!((0.0..=24.0).contains(&r));
        let mut more = obs.clone();
        more[i] = (more[i] + bump).min(1.0);
        prop_assert!(reward(&more) >= r);
    }

    #[test]
    fn buffer_respects_capacity(capacity in 1usize..50, pushes in 0usize..200) {
        let mut buffer = ReplayBuffer::new(capacity);
        for k in 0..pushes {
            buffer.push(Transition { obs: vec![k as f64], action: vec![0.0], reward: 0.0, next_obs: vec![0.0] });
            prop_assert!(buffer.len() <= capacity);
        }
        prop_assert_eq!(buffer.inserted() - buffer.evicted(), buffer.len() as u64);
        if pushes >= capacity {
            prop_assert_eq!(buffer.len(), capacity);
            let oldest = buffer.iter_oldest_first().next().unwrap().obs[0];
            prop_assert_eq!(oldest, (pushes - capacity) as f64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplified_visitors_move_at_most_one_cell(
        seed in any::<u64>(),
        actions in prop::collection::vec(prop::collection::vec(-1.0f64..=1.0, 24), 1..60),
    ) {
        let mut env = SimplifiedEnv::with_respawn(24, 2, seed).unwrap();
        let oracle = oracle_reward(24, 2).unwrap();
        for a in &actions {
            let before = env.visitors().to_vec();
            let (frame, r) = env.step_simplified(a).unwrap();
            for (p, q) in before.iter().zip(env.visitors()) {
                prop_assert!(*q < 24);
                prop_assert!(p.abs_diff(*q) <= 1);
            }
            prop_assert_eq!(r, reward(&frame.readings));
            prop_assert!(r <= oracle + 1e-12);
        }
    }

    #[test]
    fn engagement_bounded_and_order_free(frames in frames_strategy(), seed in any::<u64>()) {
        let e = engagement(&window(frames.clone())).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        let mut shuffled = frames;
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let e2 = engagement(&window(shuffled)).unwrap();
        prop_assert!((e - e2).abs() <= 1e-12);
    }

    #[test]
    fn active_count_invariant_under_threshold_preserving_maps(frames in frames_strategy()) {
        let warp = |r: f64| if r >= 0.25 { 0.25 + (r - 0.25).sqrt() * 0.75f64.sqrt() } else { 0.25 * (r / 0.25).powi(3) };
        let warped: Vec<Vec<f64>> = frames.iter().map(|f| f.iter().map(|&r| warp(r)).collect()).collect();
        prop_assert_eq!(active_count(&window(frames)).unwrap(), active_count(&window(warped)).unwrap());
    }

    #[test]
    fn exact_and_normal_agree_without_ties(values in prop::collection::btree_set(0i32..10_000, 16)) {
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let mut shuffled = values.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(values[0] as u64));
        let (a, b) = shuffled.split_at(8);
        let exact = mann_whitney_u(a, b).unwrap().p_two_sided;
        prop_assert!((exact - normal_approximation_p(a, b).unwrap()).abs() <= 0.02);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kmeans_inertia_monotone_and_reproducible(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..=1.0, 11), 12..120),
        k in 1usize..7,
        seed in any::<u64>(),
    ) {
        let a = kmeans(&rows, k, seed).unwrap();
        let b = kmeans(&rows, k, seed).unwrap();
        prop_assert_eq!(&a.assignments, &b.assignments);
        prop_assert!(a.inertia_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn qq_endpoints_are_sample_extremes(
        a in prop::collection::vec(-100.0f64..100.0, 1..50),
        b in prop::collection::vec(-100.0f64..100.0, 1..50),
    ) {
        let table = qq_table(&a, &b).unwrap();
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (first, last) = (table.first().unwrap(), table.last().unwrap());
        prop_assert_eq!((first.a, first.b), (min(&a), min(&b)));
        prop_assert_eq!((last.a, last.b), (max(&a), max(&b)));
    }
}
