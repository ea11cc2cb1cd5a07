use prmbound::geometry::{make_hallway, Aabb, Environment, Point};
use prmbound::harness::trial_seed;
use prmbound::prm::{construct, ConnectionStrategy};
use prmbound::scheduler::{
    compare_strategies, compute_new_samples, tamp_plan, HallwayShape, PlanOptions, SeedSpec, Skeleton, SkeletonStatus,
    StrategyConfig, Subproblem, TaskSpec,
};

fn two_rooms() -> Environment {
    let room = |x0: f64, x1: f64| Aabb::new(vec![x0, -0.5], vec![x1, 0.5]).unwrap();
    Environment::new(vec![room(-1.5, -0.5), room(0.5, 1.5)]).unwrap()
}

fn subproblem(env: Environment, delta: f64, seed: u64) -> Subproblem {
    Subproblem::new(env, Point::on_axis(2, -1.0), Point::on_axis(2, 1.0), delta, 0.1, seed).unwrap()
}

fn aprm() -> StrategyConfig {
    StrategyConfig::Aprm { gamma: 0.1, k: 32 }
}

fn small_family(strategies: Vec<StrategyConfig>) -> TaskSpec {
    TaskSpec {
        robot_radius: 0.05,
        object_radius_range: (0.05, 0.2),
        object_count_range: (2, 4),
        hallway: HallwayShape { d: 2, half_width: 0.45 },
        strategies,
        seeds: SeedSpec::Count(12),
        delta_min: 1e-3,
        gamma: 0.1,
        sample_cap: None,
        record_timing: false,
    }
}

#[test]
fn aprm_solves_a_feasible_hallway_within_two_attempts() {
    let solved_early = (0..50u64)
        .filter(|&seed| {
            let sk = Skeleton::new(vec![subproblem(
                make_hallway(2, 0.25).unwrap(),
                0.25,
                trial_seed(31, seed),
            )]);
            let r = tamp_plan(vec![sk], &aprm(), &PlanOptions::default()).unwrap();
            r.solved.is_some() && r.skeletons[0].attempts <= 2
        })
        .count();
    assert!(solved_early >= 45, "{solved_early}/50");
}

#[test]
fn first_aprm_attempt_uses_the_bound() {
    let env = make_hallway(2, 0.25).unwrap();
    let want = compute_new_samples(env.volume(), 0.25, 0.1, 2).unwrap();
    let sk = Skeleton::new(vec![subproblem(env, 0.25, 1)]);
    let r = tamp_plan(vec![sk], &aprm(), &PlanOptions::default()).unwrap();
    assert_eq!(r.log[0].vertices_after as u64, want);
}

#[test]
fn blocked_skeleton_is_pruned_and_keeps_its_samples() {
    let opts = PlanOptions {
        delta_min: 0.05,
        sample_cap: None,
    };
    let sk = Skeleton::new(vec![subproblem(two_rooms(), 0.25, 12)]);
    let r = tamp_plan(vec![sk], &aprm(), &opts).unwrap();
    assert_eq!(r.solved, None);
    assert_eq!(r.skeletons[0].status, SkeletonStatus::Pruned);
    // 0.25 → 0.125 → 0.0625 → 0.05 (clamped), then a failure at the floor
    assert_eq!(r.requeues, (0.25f64 / 0.05).log2().ceil() as u64);
    assert_eq!(r.queue_pops, r.requeues + 1);

    // progress preservation: sizes never shrink and every attempt resumes the last
    for w in r.log.windows(2) {
        assert_eq!(w[1].vertices_before, w[0].vertices_after);
        assert!(w[1].vertices_after >= w[0].vertices_after);
    }
    let sp = &r.skeletons[0].subproblems[0];
    let saved = sp.saved_graph.as_ref().unwrap();
    let first = r.log[0].vertices_after;
    let fresh = construct(&sp.env, first, ConnectionStrategy::Knn(32), sp.stream_seed, None).unwrap();
    assert_eq!(&saved.vertices()[..first], fresh.vertices());

    // budget accounting: every drawn sample is still in the roadmap
    assert_eq!(r.total_samples(), saved.len() as u64);
}

#[test]
fn queue_pops_are_bounded_by_the_halving_schedule() {
    let opts = PlanOptions {
        delta_min: 0.01,
        sample_cap: None,
    };
    let strategy = StrategyConfig::Sprm { n_fixed: 150, k: 32 };
    let skeletons: Vec<Skeleton> = (0..3)
        .map(|s| Skeleton::new(vec![subproblem(two_rooms(), 0.3, s)]))
        .collect();
    let r = tamp_plan(skeletons, &strategy, &opts).unwrap();
    let per_skeleton = (0.3f64 / 0.01).log2().ceil() as u64;
    assert_eq!(r.solved, None);
    assert_eq!(r.requeues, 3 * per_skeleton);
    assert!(r.queue_pops <= 3 * per_skeleton + 3);
    // fixed-size roadmaps are built once and only re-queried
    assert_eq!(r.total_samples(), 3 * 150);
}

#[test]
fn iprm_matches_sprm_when_the_first_size_suffices() {
    let m0 = 200;
    let run = |strategy: StrategyConfig| {
        let sk = Skeleton::new(vec![subproblem(make_hallway(2, 0.45).unwrap(), 0.45, 5)]);
        tamp_plan(vec![sk], &strategy, &PlanOptions::default()).unwrap()
    };
    let s = run(StrategyConfig::Sprm { n_fixed: m0, k: 32 });
    let i = run(StrategyConfig::Iprm {
        m0,
        c: 1.1,
        n_max: 4_000,
        k: 32,
    });
    assert!(s.solved.is_some() && i.solved.is_some());
    assert_eq!(s.total_samples(), m0);
    assert_eq!(i.total_samples(), m0);
    assert_eq!(s.paths(), i.paths());
}

#[test]
fn sample_cap_prunes_instead_of_growing() {
    let opts = PlanOptions {
        delta_min: 1e-3,
        sample_cap: Some(500),
    };
    let sk = Skeleton::new(vec![subproblem(make_hallway(2, 0.05).unwrap(), 0.05, 2)]);
    let r = tamp_plan(vec![sk], &aprm(), &opts).unwrap();
    assert_eq!(r.skeletons[0].status, SkeletonStatus::Pruned);
    assert_eq!(r.total_samples(), 0);
}

#[test]
fn solved_plans_store_a_path_per_subproblem() {
    let spec = small_family(vec![aprm()]);
    let sk = spec.instance(3, 0.1).unwrap();
    let count = sk.subproblems.len();
    let r = tamp_plan(vec![sk], &aprm(), &PlanOptions::default()).unwrap();
    let paths = r.paths().expect("solved");
    assert_eq!(paths.len(), count);
    for (path, sp) in paths.iter().zip(&r.skeletons[0].subproblems) {
        assert_eq!(path.first(), Some(&sp.start));
        assert_eq!(path.last(), Some(&sp.goal));
    }
}

#[test]
fn comparison_reports_are_reproducible() {
    let spec = small_family(vec![aprm(), StrategyConfig::Sprm { n_fixed: 300, k: 32 }]);
    let a = compare_strategies(&spec).unwrap();
    assert_eq!(a, compare_strategies(&spec).unwrap());
    assert_eq!(a.len(), 2 * 12);
    assert!(a.iter().all(|r| r.seconds.is_none()));
}

#[test]
fn undersampled_fixed_roadmaps_miss_the_hardest_passages() {
    let mut spec = small_family(vec![StrategyConfig::Sprm { n_fixed: 4, k: 32 }, aprm()]);
    spec.object_radius_range = (0.25, 0.25);
    spec.object_count_range = (1, 1);
    spec.seeds = SeedSpec::Count(40);
    let rows = compare_strategies(&spec).unwrap();
    let success = |label: String| rows.iter().filter(|r| r.strategy == label && r.success).count();
    let fixed = success(spec.strategies[0].label());
    assert!(fixed < 40, "sPRM(4) solved every instance");
    assert!(success(spec.strategies[1].label()) >= fixed);
}
