use proptest::prelude::*;

use pdlab::blending::whitney_blend;
use pdlab::certify::{cs_constant, mazya_truncation_audit, poincare_constant, RatioOptions, Route};
use pdlab::energy::{energy, energy_measure};
use pdlab::fixtures::{cycle, path, random_connected};
use pdlab::io::GraphFile;
use pdlab::partition::{sobolev_partition, BallOrdering};
use pdlab::scale::ScaleFunction;
use pdlab::solver::{capacity_minimizer, SolveOptions};
use pdlab::{Ball, Graph, Space};

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (3usize..14, 0usize..10, any::<u64>()).prop_map(|(n, extra, seed)| random_connected(n, extra, seed).unwrap())
}

fn values(n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn exact() -> RatioOptions {
    RatioOptions::default().with_route(Route::Exact)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn measure_is_homogeneous_and_sums_to_energy(g in graph_strategy(), seed in any::<u64>(), lam in -3.0f64..3.0, p in 1.1f64..4.0) {
        let f = values(g.n(), seed);
        let m = energy_measure(&g, &f, p).unwrap();
        let scaled: Vec<f64> = f.iter().map(|v| lam * v).collect();
        let ms = energy_measure(&g, &scaled, p).unwrap();
        for x in 0..g.n() {
            let want = lam.abs().powf(p) * m.mass[x];
            prop_assert!((ms.mass[x] - want).abs() <= 1e-10 * want.max(1e-300) + 1e-300);
        }
        let by_edge: f64 = g.edges().iter().map(|e| e.w * (f[e.u] - f[e.v]).abs().powf(p)).sum();
        prop_assert!((m.total() - by_edge).abs() <= 1e-10 * by_edge.max(1.0));
        prop_assert!((energy(&g, &f, p) - by_edge).abs() <= 1e-10 * by_edge.max(1.0));
    }

    #[test]
    fn vertexwise_minkowski(g in graph_strategy(), a in any::<u64>(), b in any::<u64>(), p in 1.1f64..4.0) {
        let f = values(g.n(), a);
        let h = values(g.n(), b);
        let sum: Vec<f64> = f.iter().zip(&h).map(|(x, y)| x + y).collect();
        let (mf, mh, ms) = (energy_measure(&g, &f, p).unwrap(), energy_measure(&g, &h, p).unwrap(), energy_measure(&g, &sum, p).unwrap());
        for x in 0..g.n() {
            let rhs = mf.mass[x].powf(1.0 / p) + mh.mass[x].powf(1.0 / p);
            prop_assert!(ms.mass[x].powf(1.0 / p) <= rhs * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn random_generator_is_deterministic(n in 2usize..40, extra in 0usize..40, seed in any::<u64>()) {
        let a: Graph = random_connected(n, extra, seed).unwrap();
        let b: Graph = random_connected(n, extra, seed).unwrap();
        prop_assert!(a.is_connected());
        prop_assert_eq!(GraphFile::from_graph(&a), GraphFile::from_graph(&b));
    }

    #[test]
    fn graph_file_round_trip(g in graph_strategy()) {
        let file = GraphFile::from_graph(&g);
        let text = serde_json::to_string(&file).unwrap();
        let back: Graph = serde_json::from_str::<GraphFile>(&text).unwrap().to_graph().unwrap();
        prop_assert_eq!(GraphFile::from_graph(&back), file);
    }

    #[test]
    fn cs_constant_shrinks_as_lambda_grows(n in 6usize..16, x in 0usize..16, r in 1.0f64..3.0) {
        let s = Space::new(path(n).unwrap()).unwrap();
        let b = Ball::new(x % (n + 1), r);
        let cut = capacity_minimizer(&s, &b, 2.0, &SolveOptions::default()).unwrap();
        let mut last = f64::INFINITY;
        for lambda in [2.0, 3.0, 5.0, 8.0] {
            let c = cs_constant(&s, &b, 2.0, lambda, &cut, &exact()).unwrap().value;
            prop_assert!(c <= last * (1.0 + 1e-9));
            last = c;
        }
    }

    #[test]
    fn poincare_constant_is_scale_invariant(g in graph_strategy(), t in 0.1f64..10.0, pick in any::<usize>()) {
        let s = Space::new(g).unwrap();
        let x = pick % s.n();
        let b = Ball::new(x, s.diameter() / 2.0);
        let psi = ScaleFunction::power(2.0);
        let st = s.with_graph(s.graph().scale_conductances(t));
        let a = poincare_constant(&s, &b, 2.0, 2.0, &psi, &exact()).unwrap().value;
        let at = poincare_constant(&st, &b, 2.0, 2.0, &psi.scaled(1.0 / t), &exact()).unwrap().value;
        prop_assert!((a - at).abs() <= 1e-9 * a.max(at).max(1e-300));
    }

    #[test]
    fn partition_sums_to_one(g in graph_strategy(), p in 1.2f64..3.0, radius in 0.3f64..1.0) {
        let s = Space::new(g).unwrap();
        let r = radius * s.diameter();
        let balls: Vec<Ball<f64>> = (0..s.n()).step_by(3).map(|x| Ball::new(x, r)).collect();
        let part = sobolev_partition(&s, &balls, p, BallOrdering::DecreasingRadius, None, &SolveOptions::default()).unwrap();
        prop_assert!(part.certificate.passed(1e-12), "{:?}", part.certificate);
        for phi in &part.phi {
            prop_assert!(phi.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn mazya_levels_hold(seed in any::<u64>(), p in 1.3f64..3.0, amp in -6.0f64..6.0) {
        let s = Space::new(cycle(24).unwrap()).unwrap();
        let b = Ball::new(0, 3.5);
        let cut = capacity_minimizer(&s, &b, p, &SolveOptions::default()).unwrap();
        let double = s.ball_members(&b.scaled(2.0));
        let noise = values(s.n(), seed);
        let g: Vec<f64> = (0..s.n()).map(|x| if double.contains(x) { 10f64.powf(amp) * noise[x] } else { 0.0 }).collect();
        let audit = mazya_truncation_audit(s.graph(), &cut.values, &g, &double, p).unwrap();
        prop_assert!(audit.passed(1e-9), "{audit:?}");
    }

    #[test]
    fn blend_matches_on_both_sides(seed in any::<u64>(), x in 0usize..40, frac in 0.1f64..0.4) {
        let s = Space::new(cycle(40).unwrap()).unwrap();
        let f = values(s.n(), seed);
        let g = values(s.n(), seed.wrapping_add(1));
        let b = Ball::new(x, s.snap_radius(x, frac * s.diameter()));
        let res = whitney_blend(&s, &f, &g, &b, 0.5, 2.0, 8.0, &SolveOptions::default()).unwrap();
        prop_assert!(res.boundary_agreement());
    }
}
