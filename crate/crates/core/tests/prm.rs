use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prmbound::geometry::{dist_sq, hallway_query, make_hallway, Environment, Point};
use prmbound::harness::{default_net_pitch, mc_success_estimate, net_check, EnvSpec, McConfig};
use prmbound::prm::{construct, ConnectionStrategy, GridIndex, PrmGraph};

fn lattice(env: &Environment, pitch: f64) -> Vec<Point> {
    let bb = env.bounding_box();
    let steps = |i: usize| ((bb.hi()[i] - bb.lo()[i]) / pitch).round() as usize;
    let mut out = Vec::new();
    for i in 0..=steps(0) {
        for j in 0..=steps(1) {
            let p = vec![bb.lo()[0] + i as f64 * pitch, bb.lo()[1] + j as f64 * pitch];
            if env.contains(&p).unwrap() {
                out.push(Point::new(p));
            }
        }
    }
    out
}

#[test]
fn certified_lattice_answers_the_hallway_query() {
    let delta = 0.25;
    let alpha = delta / 2.0;
    let env = make_hallway(2, delta).unwrap();
    let pts = lattice(&env, 0.0625);
    assert!(net_check(&pts, &env, alpha, default_net_pitch(alpha)).unwrap());
    let g = PrmGraph::from_vertices(&env, pts, ConnectionStrategy::Radius(4.0 * alpha)).unwrap();
    let (a, b) = hallway_query(2);
    let path = g
        .query(&env, &a, &b)
        .unwrap()
        .expect("net roadmap connects the hallway");
    assert_eq!(path.first(), Some(&a));
    assert_eq!(path.last(), Some(&b));
    for w in path.windows(2) {
        assert!(env.segment_free(&w[0], &w[1]).unwrap());
    }
}

#[test]
fn radius_edges_do_not_depend_on_insertion_order() {
    let env = make_hallway(2, 0.2).unwrap();
    let base = construct(&env, 400, ConnectionStrategy::Radius(0.2), 3, None).unwrap();
    let mut shuffled: Vec<(usize, Point)> = base.vertices().iter().cloned().enumerate().collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
    let g = PrmGraph::from_vertices(&env, shuffled.iter().map(|(_, p)| p.clone()).collect(), base.strategy()).unwrap();
    let mut remapped: Vec<(usize, usize)> = g
        .edges()
        .into_iter()
        .map(|(u, v)| {
            let (a, b) = (shuffled[u].0, shuffled[v].0);
            (a.min(b), a.max(b))
        })
        .collect();
    remapped.sort_unstable();
    assert_eq!(remapped, base.edges());
}

#[test]
fn knn_degree_covers_free_nearest_neighbors() {
    let env = make_hallway(2, 0.1).unwrap();
    let k = 10;
    let g = construct(&env, 800, ConnectionStrategy::Knn(k), 17, None).unwrap();
    let index = GridIndex::build(2, g.vertices());
    for v in 0..g.len() {
        let free_near = index
            .nearest(&g.vertices()[v], k, Some(v))
            .into_iter()
            .filter(|&(u, _)| env.segment_free(&g.vertices()[v], &g.vertices()[u]).unwrap())
            .count();
        assert!(g.neighbors(v).len() >= free_near);
    }
}

#[test]
fn grid_index_matches_brute_force() {
    let env = make_hallway(3, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts: Vec<Point> = (0..3_000).map(|_| env.sample_uniform(&mut rng)).collect();
    let index = GridIndex::build(3, &pts);
    for _ in 0..200 {
        let q = env.sample_uniform(&mut rng);
        let mut brute: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| (dist_sq(&q, p), i)).collect();
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got: Vec<usize> = index.nearest(&q, 12, None).into_iter().map(|(i, _)| i).collect();
        let want: Vec<usize> = brute[..12].iter().map(|&(_, i)| i).collect();
        assert_eq!(got, want);

        let mut within = index.within_radius(&q, 0.15);
        within.sort_unstable();
        let mut want: Vec<usize> = brute
            .iter()
            .take_while(|(d, _)| *d <= 0.15 * 0.15)
            .map(|&(_, i)| i)
            .collect();
        want.sort_unstable();
        assert_eq!(within, want);
    }
}

#[test]
fn queries_are_deterministic_and_do_not_mutate() {
    let env = make_hallway(2, 0.15).unwrap();
    let g = construct(&env, 1_500, ConnectionStrategy::Knn(16), 21, None).unwrap();
    let before = g.clone();
    let (a, b) = hallway_query(2);
    let first = g.query(&env, &a, &b).unwrap();
    assert!(first.is_some());
    for _ in 0..3 {
        assert_eq!(g.query(&env, &a, &b).unwrap(), first);
    }
    assert_eq!(g, before);
}

#[test]
fn incremental_growth_matches_one_shot_construction() {
    let env = make_hallway(3, 0.2).unwrap();
    for strategy in [ConnectionStrategy::Knn(8), ConnectionStrategy::Radius(0.3)] {
        let mut g = None;
        for n in [50, 120, 400, 1_000] {
            g = Some(construct(&env, n, strategy, 77, g).unwrap());
        }
        assert_eq!(g.unwrap(), construct(&env, 1_000, strategy, 77, None).unwrap());
    }
}

#[test]
fn wide_hallway_is_always_solved() {
    let report = mc_success_estimate(&McConfig {
        env: EnvSpec::Hallway { d: 2, delta: 0.499 },
        n_samples: 100,
        strategy: ConnectionStrategy::Knn(32),
        trials: 100,
        master_seed: 1,
        query: None,
    })
    .unwrap();
    assert_eq!(report.p_hat, 1.0);
}
