use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prmbound::bounds::{ball_measure, numerical_sample_bound, BoundQuery};
use prmbound::geometry::{Environment, Point};
use prmbound::harness::{
    knn_radius_empirical, mc_success_estimate_with, net_check, run_table, run_table_rows, table_csv, trial_seed,
    EnvSpec, Execution, McConfig, TableSpec,
};
use prmbound::prm::ConnectionStrategy;

fn shipped_table_spec() -> TableSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/table1_knn.json");
    TableSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn parallel_and_serial_runs_agree() {
    let cfg = McConfig {
        env: EnvSpec::Hallway { d: 3, delta: 0.125 },
        n_samples: 300,
        strategy: ConnectionStrategy::Knn(32),
        trials: 40,
        master_seed: 9,
        query: None,
    };
    let serial = mc_success_estimate_with(&cfg, Execution::Serial).unwrap();
    let parallel = mc_success_estimate_with(&cfg, Execution::Parallel).unwrap();
    assert_eq!(serial.outcomes(), parallel.outcomes());
    assert_eq!(serial.successes, parallel.successes);
    assert_eq!(serial.p_hat, parallel.p_hat);
}

#[test]
fn growing_the_trial_count_keeps_earlier_trials() {
    let cfg = McConfig {
        env: EnvSpec::Hallway { d: 2, delta: 0.0625 },
        n_samples: 100,
        strategy: ConnectionStrategy::Knn(32),
        trials: 20,
        master_seed: 3,
        query: None,
    };
    let short = mc_success_estimate_with(&cfg, Execution::Serial).unwrap();
    let long = mc_success_estimate_with(&McConfig { trials: 50, ..cfg }, Execution::Serial).unwrap();
    assert_eq!(short.outcomes(), long.outcomes()[..20]);
}

#[test]
fn bound_sized_uniform_samples_pass_the_net_check() {
    let env = Environment::unit_cube(2).unwrap();
    let alpha = 0.5;
    let p = ball_measure(2, alpha, env.volume()).unwrap().value().unwrap();
    let n = numerical_sample_bound(&BoundQuery::new(2, p, 0.1).unwrap())
        .unwrap()
        .samples;
    let passed = (0..100u64)
        .filter(|&t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(2024, t));
            let pts: Vec<Point> = (0..n).map(|_| env.sample_uniform(&mut rng)).collect();
            net_check(&pts, &env, alpha, alpha / 8.0).unwrap()
        })
        .count();
    assert!(passed >= 85, "{passed}/100 with n={n}");
}

#[test]
fn net_check_rejects_coarse_pitch() {
    let env = Environment::unit_cube(2).unwrap();
    let pts = [Point::new(vec![0.5, 0.5])];
    assert!(net_check(&pts, &env, 0.1, 0.2).unwrap_err().is_validation());
}

#[test]
fn empirical_radius_summary_is_reproducible_and_shrinks() {
    let a = knn_radius_empirical(2, 16, 10_000, 100, 5, 0.01).unwrap();
    let b = knn_radius_empirical(2, 16, 10_000, 100, 5, 0.01).unwrap();
    assert_eq!(a, b);
    assert!(a.exceed_fraction.unwrap() >= 0.97);
    let denser = knn_radius_empirical(2, 16, 20_000, 100, 5, 0.01).unwrap();
    assert!(denser.median < a.median);
    assert!(knn_radius_empirical(2, 16, 17, 10, 5, 0.01)
        .unwrap_err()
        .is_validation());
}

#[test]
fn shipped_table_bounds_match_reference_values() {
    let spec = TableSpec {
        trials: 1,
        n_values: vec![100],
        ..shipped_table_spec()
    };
    let reference = [
        [1.19e3, 5.20e3, 2.46e4, 1.24e5, 6.60e5],
        [4.53e3, 3.73e4, 3.45e5, 3.45e6, 3.67e7],
        [1.86e4, 3.24e5, 6.36e6, 1.33e8, 2.89e9],
        [7.88e4, 2.93e6, 1.19e8, 5.04e9, 2.21e11],
    ];
    let rows = run_table_rows(&spec).unwrap();
    assert_eq!(rows.len(), 20);
    for (row, want) in rows.iter().zip(reference.iter().flatten()) {
        let rel = (row.bound_samples as f64 - want).abs() / want;
        assert!(
            rel < 0.01,
            "delta={} d={}: {} vs {want}",
            row.delta,
            row.d,
            row.bound_samples
        );
    }
}

#[test]
fn table_rerun_is_byte_identical() {
    let spec = r#"{"deltas": [0.25, 0.125], "dims": [2, 3], "n_values": [100, 300],
                   "strategies": [{"knn": 16}, {"radius": null}], "trials": 10, "master_seed": 4}"#;
    let first = run_table(spec).unwrap();
    assert_eq!(first, run_table(spec).unwrap());
    assert_eq!(first.lines().count(), 1 + 2 * 2 * 2 * 2);
    assert!(first.starts_with("delta,d,n,strategy,p_hat,bound_samples,seconds\n"));
    // timing is off by default, so the seconds column stays empty
    assert!(first.lines().skip(1).all(|l| l.ends_with(',')));
    let rows = run_table_rows(&TableSpec::from_json(spec).unwrap()).unwrap();
    assert_eq!(table_csv(&rows).unwrap(), first);
}

#[test]
fn success_does_not_drop_with_more_samples() {
    let spec = TableSpec {
        dims: vec![2, 3, 4],
        ..shipped_table_spec()
    };
    let rows = run_table_rows(&spec).unwrap();
    for pair in rows.chunks(2) {
        let (small, large) = (&pair[0], &pair[1]);
        assert_eq!((small.n, large.n), (100, 1000));
        assert!(large.p_hat >= small.p_hat - 0.1, "delta={} d={}", small.delta, small.d);
    }
}
