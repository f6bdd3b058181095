use nalgebra::DVector;
use rtphd::config::{ScenarioConfig, VariantKind};
use rtphd::models::ct_transition;
use rtphd::scenario::{
    generate_scan, generate_truth, run_monte_carlo, run_rng, simulate_run, GroundTruth, MonteCarloOptions, Variant,
};
use rtphd::types::Trajectory;

fn models(
    c: &ScenarioConfig,
) -> (
    Box<dyn rtphd::MotionModel>,
    Box<dyn rtphd::SensorModel>,
    rtphd::ClutterSpatialDensity,
) {
    (
        c.motion_model().unwrap(),
        c.sensor_model().unwrap(),
        c.clutter_density().unwrap(),
    )
}

#[test]
fn noise_free_truth_follows_the_turn_model() {
    let mut c = ScenarioConfig::default();
    c.targets.process_noise = false;
    let (m, s, r) = models(&c);
    let truth = generate_truth(&c, m.as_ref(), s.as_ref(), &r, 100, &mut run_rng(0, 0, 1));
    let t1 = &truth.trajectories[0];
    assert_eq!(t1.birth_time, 1);
    assert_eq!(t1.states[0].as_slice(), &[1005.0, 8.0, 1489.0, -10.0, 0.0]);
    let expected = ct_transition(&t1.states[0], 1.0, 1.0, std::f64::consts::PI / 180.0).mean;
    assert_eq!(t1.states[1], expected);
    assert_eq!(t1.end_time(), 100);
    assert_eq!(truth.trajectories[2].end_time(), 80);
    assert_eq!(truth.trajectories[3].birth_time, 40);
}

#[test]
fn same_seed_gives_byte_identical_runs() {
    let c = ScenarioConfig::default();
    let a = serde_json::to_vec(&simulate_run(&c, 100, 42, 7).unwrap()).unwrap();
    let b = serde_json::to_vec(&simulate_run(&c, 100, 42, 7).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn clutter_count_is_binomial_mean() {
    let c = ScenarioConfig::default();
    let (_, s, r) = models(&c);
    let empty = GroundTruth {
        trajectories: vec![],
        horizon: 1,
    };
    let mut rng = run_rng(3, 0, 2);
    let scans = 10_000;
    let total: usize = (0..scans)
        .map(|_| generate_scan(&c, &empty, s.as_ref(), &r, 1, &mut rng).unwrap().len())
        .sum();
    let mean = total as f64 / scans as f64;
    // Binomial(20, 0.5): standard error of the mean is sqrt(5 / 1e4) ~ 0.022.
    assert!((mean - 10.0).abs() < 0.1, "{mean}");
}

#[test]
fn detection_frequency_matches_true_probability() {
    let mut c = ScenarioConfig::default();
    c.clutter.generators = 0;
    let (_, s, r) = models(&c);
    // A target parked where its measurement can never leave the sensor region.
    let x = DVector::from_vec(vec![0.0, 0.0, 1000.0, 0.0, 0.0]);
    let truth = GroundTruth {
        trajectories: vec![Trajectory::new(1, vec![x])],
        horizon: 1,
    };
    let mut rng = run_rng(4, 0, 2);
    let n = 100_000;
    let hits: usize = (0..n)
        .map(|_| generate_scan(&c, &truth, s.as_ref(), &r, 1, &mut rng).unwrap().len())
        .sum();
    let freq = hits as f64 / n as f64;
    assert!((freq - 0.98).abs() < 0.005, "{freq}");
}

#[test]
fn degenerate_scans() {
    // No target detections and no clutter generators: every scan is empty
    // even though targets exist.
    let mut none = ScenarioConfig::default();
    none.targets.detection_probability = 0.0;
    none.clutter.generators = 0;
    let sim = simulate_run(&none, 30, 1, 0).unwrap();
    assert!(sim.truth.cardinality(20) > 0);
    assert!(sim.scans.iter().all(|s| s.is_empty()));
}

fn small_options(c: &ScenarioConfig, runs: usize) -> MonteCarloOptions {
    let mut o = MonteCarloOptions::from_config(
        c,
        vec![Variant {
            kind: VariantKind::Robust,
            window: Some(2),
        }],
    );
    o.runs = runs;
    o.horizon = 15;
    o.keep_records = true;
    o
}

#[test]
fn adding_runs_keeps_earlier_runs() {
    let c = ScenarioConfig::default();
    let a = run_monte_carlo(&c, &small_options(&c, 2)).unwrap();
    let b = run_monte_carlo(&c, &small_options(&c, 4)).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.scans, rb.scans);
        assert_eq!(ra.seed, rb.seed);
    }
    assert_eq!(a.truths[..], b.truths[..2]);
}

#[test]
fn parallel_and_serial_agree() {
    let c = ScenarioConfig::default();
    let mut o = small_options(&c, 3);
    let par = run_monte_carlo(&c, &o).unwrap();
    o.parallel = false;
    let ser = run_monte_carlo(&c, &o).unwrap();
    for (a, b) in par.records.iter().zip(&ser.records) {
        assert_eq!(a.scans, b.scans);
        assert_eq!(a.estimates, b.estimates);
    }
    assert_eq!(par.summaries[0].scans, ser.summaries[0].scans);
}

#[test]
fn aggregates_are_plain_averages() {
    let c = ScenarioConfig::default();
    let mc = run_monte_carlo(&c, &small_options(&c, 3)).unwrap();
    let s = &mc.summaries[0];
    assert_eq!(s.runs, 3);
    for (t, row) in s.scans.iter().enumerate() {
        let card: f64 = mc.records.iter().map(|r| r.scans[t].cardinality as f64).sum::<f64>() / 3.0;
        let clutter: f64 = mc.records.iter().map(|r| r.scans[t].clutter_rate as f64).sum::<f64>() / 3.0;
        let rms = (mc.records.iter().map(|r| r.scans[t].tm.powi(2)).sum::<f64>() / 3.0).sqrt();
        let truth: f64 = mc.truths.iter().map(|g| g.cardinality(t + 1) as f64).sum::<f64>() / 3.0;
        assert!((row.mean_cardinality - card).abs() < 1e-12);
        assert!((row.mean_clutter_rate - clutter).abs() < 1e-12);
        assert!((row.rms_tm - rms).abs() < 1e-12);
        assert!((row.true_cardinality - truth).abs() < 1e-12);
    }
}
