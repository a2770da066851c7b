use approx::assert_relative_eq;
use bayes_ftc::controllers::{
    uaic_step, ControllerBelief, LinearObservation, ObservationModel, PrecisionSet, Prediction, UaicModel,
    UaicOptimizer,
};
use bayes_ftc::detection::{
    beta_residual, detect, ef_fdi, predict_prob, roc_auc, Health, LogisticModel, learn_threshold,
};
use bayes_ftc::faults::{corrupt, generate_schedule, FaultEvent, FaultKind, FaultProfile, FaultSchedule};
use bayes_ftc::harness::{merit_table, FtTechnique, ScenarioSamples, MERIT_TECHNIQUES};
use bayes_ftc::plants::{
    barrel_distort, observe_cruise, observe_manipulator, step_cruise, CruiseConfig, ManipulatorConfig,
    ManipulatorSensor, Observation, PlantState,
};
use bayes_ftc::precision::{GammaBelief, PointPrecision, PointRule, WishartBelief};
use bayes_ftc::rng::stream;
use nalgebra::{DMatrix, DVector, Rotation2};
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

fn obs(v: f64, t: f64) -> Observation {
    Observation {
        sensor_id: 0,
        value: DVector::from_element(1, v),
        t,
    }
}

fn spd(entries: &[f64], n: usize) -> DMatrix<f64> {
    let l = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    &l * l.transpose() + DMatrix::identity(n, n) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // plants

    #[test]
    fn cruise_step_is_affine(x1 in -50.0..50.0f64, x2 in -50.0..50.0f64) {
        let cfg = CruiseConfig::default();
        let zero = DVector::zeros(1);
        let step = |x: f64| step_cruise(&PlantState::scalar(x, 0.0), &zero, &cfg, None).x[0];
        assert_relative_eq!(step(x1) + step(x2) - step(0.0), step(x1 + x2), epsilon = 1e-12);
    }

    #[test]
    fn cruise_step_contracts_without_input(x in -1e3..1e3f64) {
        let cfg = CruiseConfig::default();
        let next = step_cruise(&PlantState::scalar(x, 0.0), &DVector::zeros(1), &cfg, None).x[0];
        prop_assert!(next.abs() <= x.abs());
    }

    #[test]
    fn barrel_distortion_commutes_with_rotation(
        a in -3.0..3.0f64, b in -3.0..3.0f64, angle in 0.0..std::f64::consts::TAU,
        k1 in -0.1..0.1f64, k2 in -0.01..0.01f64, k3 in -0.001..0.001f64,
    ) {
        let rot = Rotation2::new(angle);
        let v = DVector::from_vec(vec![a, b]);
        let rv = DVector::from_column_slice((rot * nalgebra::Vector2::new(a, b)).as_slice());
        let before = barrel_distort(&rv, k1, k2, k3);
        let d = barrel_distort(&v, k1, k2, k3);
        let after = rot * nalgebra::Vector2::new(d[0], d[1]);
        prop_assert!((before[0] - after[0]).abs() < 1e-10 && (before[1] - after[1]).abs() < 1e-10);
    }

    #[test]
    fn noise_free_observations_equal_the_model(x in -20.0..20.0f64, q1 in -2.0..2.0f64, q2 in -2.0..2.0f64) {
        let cc = CruiseConfig::default();
        let y = observe_cruise(&PlantState::scalar(x, 0.0), 1, &cc, None).unwrap();
        prop_assert_eq!(y.value[0], x);
        let mc = ManipulatorConfig::default();
        let state = PlantState::new(DVector::from_vec(vec![q1, q2, 0.3, -0.2]), 0.0);
        let cam = observe_manipulator(&state, ManipulatorSensor::Camera, &mc, None);
        let [k1, k2, k3] = mc.distortion;
        prop_assert_eq!(cam.value, barrel_distort(&DVector::from_vec(vec![q1, q2]), k1, k2, k3));
    }

    // faults

    #[test]
    fn poisson_events_are_sorted_disjoint_and_in_horizon(seed in 0u64..1000, horizon in 1.0..200.0f64) {
        let mut rng = stream(seed, 0, 1);
        let s = generate_schedule(2.8, 0.4, horizon, 2, &FaultProfile::default(), &mut rng).unwrap();
        for sensor in 0..2 {
            let evs: Vec<_> = s.events_for(sensor).collect();
            for w in evs.windows(2) {
                prop_assert!(w[0].end() <= w[1].start);
            }
            for e in &evs {
                prop_assert!(e.start >= 0.0 && e.start < horizon && e.duration > 0.0);
            }
        }
    }

    #[test]
    fn corrupt_is_identity_outside_windows(y in -10.0..10.0f64, t in 0.0..20.0f64, start in 0.0..20.0f64) {
        let ev = FaultEvent::new(0, FaultKind::Injection { offset: 5.0 }, start, 1.0).unwrap();
        let s = FaultSchedule::new(vec![ev], 30.0).unwrap();
        let active = s.active(0, t);
        let out = corrupt(&obs(y, t), active, &obs(0.0, 0.0), t);
        if active.is_none() {
            prop_assert_eq!(out.value[0], y);
        }
    }

    #[test]
    fn drift_starts_from_zero_offset(y in -10.0..10.0f64, rate in -5.0..5.0f64, start in 0.0..10.0f64) {
        let ev = FaultEvent::new(0, FaultKind::Drift { rate }, start, 1.0).unwrap();
        let out = corrupt(&obs(y, start), Some(&ev), &obs(0.0, 0.0), start);
        prop_assert_eq!(out.value[0], y);
    }

    #[test]
    fn freeze_is_idempotent(y in -10.0..10.0f64, held in -10.0..10.0f64) {
        let ev = FaultEvent::new(0, FaultKind::Freeze, 0.0, 5.0).unwrap();
        let once = corrupt(&obs(y, 1.0), Some(&ev), &obs(held, 0.0), 1.0);
        let twice = corrupt(&once, Some(&ev), &obs(held, 0.0), 1.0);
        prop_assert_eq!(once.value, twice.value);
    }

    // precision

    #[test]
    fn expected_precision_falls_with_residual(a in 0.5..10.0f64, b in 0.1..10.0f64, r1 in 0.0..5.0f64, dr in 0.0..5.0f64) {
        let prior = GammaBelief::new(a, b).unwrap();
        prop_assert!(prior.update(r1 + dr, 0.0).mean() <= prior.update(r1, 0.0).mean());
    }

    #[test]
    fn forgetting_composes(a in 0.5..50.0f64, b in 0.5..50.0f64, l1 in 0.01..1.0f64, l2 in 0.01..1.0f64) {
        let prior = GammaBelief::default();
        let g = GammaBelief::new(a, b).unwrap();
        let two = g.forget(l1, &prior).unwrap().forget(l2, &prior).unwrap();
        let one = g.forget(l1 * l2, &prior).unwrap();
        assert_relative_eq!(two.alpha, one.alpha, max_relative = 1e-12);
        assert_relative_eq!(two.beta, one.beta, max_relative = 1e-12);
    }

    #[test]
    fn wishart_update_matches_gamma_in_one_dimension(n in 1.0..20.0f64, v in 0.05..5.0f64, y in -5.0..5.0f64, c in -5.0..5.0f64) {
        let w = WishartBelief::new(n, DMatrix::from_element(1, 1, v)).unwrap()
            .update(&DVector::from_element(1, y), &DVector::from_element(1, c)).unwrap();
        let g = GammaBelief::new(n / 2.0, 1.0 / (2.0 * v)).unwrap().update(y, c);
        assert_relative_eq!(w.dof / 2.0, g.alpha, max_relative = 1e-12);
        assert_relative_eq!(1.0 / (2.0 * w.scale[(0, 0)]), g.beta, max_relative = 1e-12);
    }

    #[test]
    fn point_update_stays_spd_above_floor(
        entries in prop::collection::vec(-1.0..1.0f64, 4),
        residual in prop::collection::vec(-50.0..50.0f64, 2),
        natural in any::<bool>(),
        steps in 1usize..40,
    ) {
        let floor = 1e-3;
        let rule = if natural { PointRule::Natural } else { PointRule::Euclidean };
        let mut p = PointPrecision::new(spd(&entries, 2), 0.05, floor).unwrap().with_rule(rule);
        let r = DVector::from_vec(residual);
        for _ in 0..steps {
            p = p.update(&r).unwrap();
            let eig = p.value.clone().symmetric_eigen().eigenvalues;
            prop_assert!(eig.iter().all(|&e| e >= floor * (1.0 - 1e-9)));
            prop_assert!((&p.value - p.value.transpose()).amax() < 1e-9);
        }
    }

    // controllers

    #[test]
    fn common_precision_scale_keeps_the_argmin(
        scale in 0.01..100.0f64,
        y in prop::collection::vec(-3.0..3.0f64, 2),
        x0 in -3.0..3.0f64, goal in -3.0..3.0f64,
    ) {
        let model = UaicModel {
            sensors: vec![Box::new(LinearObservation::scalar()), Box::new(LinearObservation::scalar())],
            gain: DMatrix::from_element(1, 1, 1.0),
            prediction: Prediction::RandomWalk,
        };
        let base = PrecisionSet {
            sensors: vec![DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 0.5)],
            state: DMatrix::from_element(1, 1, 1.0),
            action: DMatrix::from_element(1, 1, 3.0),
            goal: None,
        };
        let scaled = PrecisionSet {
            sensors: base.sensors.iter().map(|p| p * scale).collect(),
            state: &base.state * scale,
            action: &base.action * scale,
            goal: None,
        };
        let ys: Vec<_> = y.iter().map(|&v| DVector::from_element(1, v)).collect();
        let belief = ControllerBelief::new(DVector::from_element(1, x0), 1);
        let opt = UaicOptimizer::GaussNewton { iterations: 5, tolerance: 1e-14 };
        let mu_d = DVector::from_element(1, goal);
        let a = uaic_step(&belief, &ys, &model, &base, &mu_d, &opt).unwrap();
        let b = uaic_step(&belief, &ys, &model, &scaled, &mu_d, &opt).unwrap();
        assert_relative_eq!(a.belief.mu_x[0], b.belief.mu_x[0], epsilon = 1e-9);
        assert_relative_eq!(a.u[0], b.u[0], epsilon = 1e-9);
    }

    #[test]
    fn vanishing_precision_equals_removing_the_sensor(
        y in prop::collection::vec(-3.0..3.0f64, 2),
        x0 in -3.0..3.0f64, goal in -3.0..3.0f64,
    ) {
        let lin = || Box::new(LinearObservation::scalar()) as Box<dyn ObservationModel>;
        let both = UaicModel { sensors: vec![lin(), lin()], gain: DMatrix::from_element(1, 1, 1.0), prediction: Prediction::RandomWalk };
        let one = UaicModel { sensors: vec![lin()], gain: DMatrix::from_element(1, 1, 1.0), prediction: Prediction::RandomWalk };
        let p = |v: f64| DMatrix::from_element(1, 1, v);
        let with = PrecisionSet { sensors: vec![p(2.0), p(1e-12)], state: p(1.0), action: p(1.0), goal: None };
        let without = PrecisionSet { sensors: vec![p(2.0)], state: p(1.0), action: p(1.0), goal: None };
        let belief = ControllerBelief::new(DVector::from_element(1, x0), 1);
        let opt = UaicOptimizer::GaussNewton { iterations: 5, tolerance: 1e-14 };
        let mu_d = DVector::from_element(1, goal);
        let ys: Vec<_> = y.iter().map(|&v| DVector::from_element(1, v)).collect();
        let a = uaic_step(&belief, &ys, &both, &with, &mu_d, &opt).unwrap();
        let b = uaic_step(&belief, &ys[..1], &one, &without, &mu_d, &opt).unwrap();
        assert_relative_eq!(a.belief.mu_x[0], b.belief.mu_x[0], epsilon = 1e-9);
    }

    // detection

    #[test]
    fn ef_residual_ignores_added_affine_trend(
        y in prop::collection::vec(-8i32..8, 3),
        a in -64i32..64, b in -64i32..64,
    ) {
        // quarter-integer values keep every sum exact
        let ys: Vec<f64> = y.iter().map(|&v| v as f64 / 4.0).collect();
        let shifted: Vec<f64> = ys.iter().enumerate().map(|(k, v)| v + a as f64 / 4.0 + b as f64 / 4.0 * k as f64).collect();
        prop_assert_eq!(ef_fdi(&ys, &[0.0, 0.0]).unwrap().0, ef_fdi(&shifted, &[0.0, 0.0]).unwrap().0);
    }

    #[test]
    fn classifier_auc_equals_feature_auc(
        data in prop::collection::vec((-5.0..5.0f64, any::<bool>()), 4..60),
        slope in 0.01..5.0f64, intercept in -3.0..3.0f64,
    ) {
        let labels: Vec<u8> = data.iter().map(|d| u8::from(d.1)).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let raw: Vec<f64> = data.iter().map(|d| d.0).collect();
        let model = LogisticModel { slope, intercept, threshold: 0.5 };
        let probs: Vec<f64> = raw.iter().map(|&x| predict_prob(&model, x)).collect();
        for w in raw.iter().zip(&probs).collect::<Vec<_>>().windows(2) {
            if w[0].0 < w[1].0 {
                prop_assert!(w[0].1 <= w[1].1);
            }
        }
        // keep the probabilities away from saturation ties
        prop_assume!(probs.iter().all(|&p| p > 1e-12 && p < 1.0 - 1e-12));
        let a = roc_auc(&raw, &labels).unwrap().auc;
        let b = roc_auc(&probs, &labels).unwrap().auc;
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn beta_never_drops_on_an_update(a in 0.5..50.0f64, b in 0.1..50.0f64, y in -10.0..10.0f64, c in -10.0..10.0f64) {
        let g = GammaBelief::new(a, b).unwrap();
        prop_assert!(beta_residual(&g.update(y, c)) >= beta_residual(&g));
    }

    #[test]
    fn learned_threshold_bounds_false_positives(seed in 0u64..500) {
        let mut rng = stream(seed, 0, 0);
        let normal = Normal::<f64>::new(0.0, 1.0).unwrap();
        let train: Vec<f64> = (0..4000).map(|_| normal.sample(&mut rng).abs()).collect();
        let fresh: Vec<f64> = (0..4000).map(|_| normal.sample(&mut rng).abs()).collect();
        let confidence = 0.99;
        let th = learn_threshold(&train, confidence).unwrap();
        let fp = fresh.iter().filter(|&&r| detect(r, &th) == Health::Faulty).count() as f64 / fresh.len() as f64;
        let p = 1.0 - confidence;
        let slack = 3.0 * (p * (1.0 - p) / fresh.len() as f64).sqrt() + 3.0 * (p * (1.0 - p) / train.len() as f64).sqrt();
        prop_assert!(fp <= p + slack, "fpr {} above {}", fp, p + slack);
    }

    // harness

    #[test]
    fn merit_is_antisymmetric_and_sums_to_zero(
        samples in prop::collection::vec(prop::collection::vec(0.0..3.0f64, 4 * 5), 1..9),
    ) {
        let scenarios: Vec<ScenarioSamples> = samples.iter().enumerate().map(|(i, flat)| ScenarioSamples {
            name: format!("s{i}"),
            samples: MERIT_TECHNIQUES.iter().enumerate()
                .map(|(k, &ft)| (ft, flat[k * 5..(k + 1) * 5].iter().map(|v| v + k as f64 * 0.3).collect()))
                .collect(),
        }).collect();
        let t = merit_table(&MERIT_TECHNIQUES, &scenarios, 0.05).unwrap();
        let n = MERIT_TECHNIQUES.len();
        for i in 0..n {
            prop_assert_eq!(t.pairwise[i][i], 0);
            for j in 0..n {
                prop_assert_eq!(t.pairwise[i][j], -t.pairwise[j][i]);
                prop_assert!(t.pairwise[i][j].abs() <= scenarios.len() as i32);
            }
        }
        prop_assert_eq!(t.total_merit.iter().sum::<i32>(), 0);
        prop_assert!(t.total_of(FtTechnique::PlImplicit).is_some());
    }
}
