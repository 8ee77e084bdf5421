//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p pdlab-core --test acceptance`. Pass criterion
//! numbers as arguments to run a subset.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdlab::blending::{blend_energy_report, whitney_blend};
use pdlab::certify::{
    constructive_cs_pipeline, cs_constant, cs_equivalence_check, mazya_truncation_audit, maximize_ratio,
    poincare_constant, poincare_problem, RatioOptions, Route,
};
use pdlab::energy::axioms_report;
use pdlab::fixtures::{connected_graphs, gasket, lattice_box, path, random_connected};
use pdlab::partition::{partition_energy_audit, sobolev_partition, BallOrdering};
use pdlab::scale::ScaleFunction;
use pdlab::solver::{capacity_minimizer, check_superharmonic, cutoff_between, SolveOptions};
use pdlab::whitney::{neighbor_geometry_check, whitney_cover};
use pdlab::{Ball, Space, VertexSet};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn lattice16() -> Space {
    Space::new(lattice_box(2, 16).unwrap()).unwrap()
}

/// Vertex `(8, 8)` of the 16 x 16 box.
const MID16: usize = 8 + 16 * 8;

fn gasket_space(level: usize) -> Space {
    Space::new(gasket(level, 5.0 / 3.0).unwrap()).unwrap()
}

fn gasket_beta() -> f64 {
    5f64.ln() / 2f64.ln()
}

/// Vertex nearest to the centroid of the generator coordinates.
fn central_vertex(s: &Space) -> usize {
    let c = s.graph().coords().unwrap();
    let dim = c[0].len();
    let mean: Vec<f64> = (0..dim).map(|k| c.iter().map(|v| v[k]).sum::<f64>() / c.len() as f64).collect();
    let dist = |v: &Vec<f64>| v.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..s.n()).min_by(|&a, &b| dist(&c[a]).partial_cmp(&dist(&c[b])).unwrap()).unwrap()
}

fn annuli(s: &Space) -> Vec<VertexSet> {
    let c = central_vertex(s);
    let d = s.diameter();
    [(d / 8.0, d / 2.0), (d / 4.0, d), (d / 16.0, d / 4.0)]
        .iter()
        .map(|&(r1, r2)| s.ball_members(&Ball::new(c, r2)).difference(&s.closed_ball_members(&Ball::new(c, r1))))
        .filter(|o| !o.is_empty() && !o.is_full())
        .collect()
}

fn criterion_1() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..50 {
        let n = rng.random_range(2..=30);
        let extra = rng.random_range(0..=n);
        let g = random_connected::<f64>(n, extra, 100 + k).unwrap();
        for &p in &[1.5, 2.0, 3.0] {
            let rep = axioms_report(&g, p, 20, k, 1e-9).unwrap();
            for name in ["triangle", "homogeneity", "contraction", "locality"] {
                let e = rep.entry(name).unwrap();
                worst = worst.min(e.worst_slack);
                if e.worst_slack < -1e-9 {
                    failures += 1;
                }
            }
        }
    }
    outcome(failures == 0, format!("worst relative slack {worst:.3e}"))
}

fn criterion_2() -> Outcome {
    let mut worst_cap = 0.0f64;
    let mut worst_lin = 0.0f64;
    for &n in &[2usize, 8, 32] {
        let g = path::<f64>(n).unwrap();
        for &p in &[1.5, 2.0, 3.0] {
            let inner = VertexSet::from_members(n + 1, [0]);
            let outer = VertexSet::from_members(n + 1, 0..n);
            let c = cutoff_between(&g, &inner, &outer, p, &SolveOptions::default()).unwrap();
            worst_cap = worst_cap.max(rel(c.capacity, (n as f64).powf(1.0 - p)));
            for k in 0..=n {
                worst_lin = worst_lin.max((c.values[k] - (1.0 - k as f64 / n as f64)).abs());
            }
        }
    }
    outcome(worst_cap <= 1e-8 && worst_lin <= 1e-6, format!("capacity rel err {worst_cap:.2e}, linearity {worst_lin:.2e}"))
}

fn criterion_3() -> Outcome {
    let s = lattice16();
    let psi = ScaleFunction::power(2.0);
    let exact = RatioOptions::default().with_route(Route::Exact);
    let iter = RatioOptions::default().with_route(Route::Iterative);
    let mut worst = 0.0f64;
    let mut values = Vec::new();
    for &r in &[4.0, 8.0] {
        let b = Ball::new(MID16, r);
        let e = poincare_constant(&s, &b, 2.0, 2.0, &psi, &exact).unwrap();
        let i = poincare_constant(&s, &b, 2.0, 2.0, &psi, &iter).unwrap();
        worst = worst.max(rel(e.value, i.value));
        let cut = capacity_minimizer(&s, &b, 2.0, &SolveOptions::default()).unwrap();
        let ce = cs_constant(&s, &b, 2.0, 2.0, &cut, &exact).unwrap();
        let ci = cs_constant(&s, &b, 2.0, 2.0, &cut, &iter).unwrap();
        worst = worst.max(rel(ce.value, ci.value));
        values.push(format!("r={r}: C_PI {:.6} C_CS {:.6}", e.value, ce.value));
    }
    outcome(worst <= 1e-6, format!("max rel diff {worst:.2e}; {}", values.join(", ")))
}

fn grid_ratio(prob: &pdlab::certify::RatioProblem<f64>, f: &[f64]) -> f64 {
    let den = prob.denominator_value(f);
    if den > 0.0 {
        prob.numerator_value(f) / den
    } else {
        0.0
    }
}

/// Best points of the grid `center + step * {-2, ..., 2}^n`.
fn grid_scan(prob: &pdlab::certify::RatioProblem<f64>, center: &[f64], step: f64, keep: usize) -> Vec<(f64, Vec<f64>)> {
    let n = center.len();
    let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut f = vec![0.0; n];
    for code in 0..5usize.pow(n as u32) {
        let mut c = code;
        for (v, &m) in f.iter_mut().zip(center) {
            *v = m + step * ((c % 5) as f64 - 2.0);
            c /= 5;
        }
        let r = grid_ratio(prob, &f);
        if best.len() < keep || r > best[best.len() - 1].0 {
            best.push((r, f.clone()));
            best.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            best.truncate(keep);
        }
    }
    best
}

/// Supremum over `{-1, -1/2, 0, 1/2, 1}^n`, and the same search continued
/// on successively finer grids around the best coarse points.
fn grid_sup(prob: &pdlab::certify::RatioProblem<f64>) -> (f64, f64) {
    let coarse = grid_scan(prob, &vec![0.0; prob.n], 0.5, 16);
    let mut fine = coarse[0].0;
    for (_, start) in &coarse {
        let (mut point, mut step, mut rounds) = (start.clone(), 0.25, 0);
        while step > 1e-12 && rounds < 5000 {
            rounds += 1;
            let here = grid_ratio(prob, &point);
            let (r, best) = grid_scan(prob, &point, step, 1).remove(0);
            if r > here * (1.0 + 1e-14) {
                point = best;
                fine = fine.max(r);
            } else {
                step /= 2.0;
            }
        }
    }
    (coarse[0].0, fine)
}

fn criterion_4() -> Outcome {
    let p = 1.5;
    let mut cases = 0;
    let mut above = 0;
    let mut below = 0;
    let mut above_coarse = 0;
    let mut worst_hi = 0.0f64;
    let mut worst_lo = f64::INFINITY;
    for n in 2..=4 {
        for g in connected_graphs::<f64>(n) {
            let s = Space::new(g).unwrap();
            for x in 0..n {
                for r in s.radius_grid(x) {
                    let b = Ball::new(x, r);
                    if s.ball_members(&b).len() < 2 {
                        continue;
                    }
                    let prob = poincare_problem(&s, &b, p, 2.0).unwrap();
                    let it = maximize_ratio(&prob, &RatioOptions::default()).unwrap().value;
                    let (coarse, grid) = grid_sup(&prob);
                    cases += 1;
                    let q = it / grid;
                    worst_hi = worst_hi.max(q);
                    worst_lo = worst_lo.min(q);
                    if it > coarse * (1.0 + 1e-9) {
                        above_coarse += 1;
                    }
                    if it > grid * (1.0 + 1e-9) {
                        above += 1;
                    }
                    if it < 0.9 * grid {
                        below += 1;
                    }
                }
            }
        }
    }
    outcome(
        above == 0 && below == 0,
        format!(
            "{cases} balls; iterative/grid in [{worst_lo:.9}, {worst_hi:.9}]; {above} above, {below} below 0.9x; {above_coarse} above the step-1/2 grid alone"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, s) in [("lattice_box(2,32)", Space::new(lattice_box(2, 32).unwrap()).unwrap()), ("gasket(5)", gasket_space(5))] {
        for omega in annuli(&s) {
            let cover = whitney_cover(&s, &omega, 8.0).unwrap();
            let nb = neighbor_geometry_check(&s, &cover);
            let good = cover.certificate.passed() && nb.passed();
            ok &= good;
            detail.push(format!("{name} |Ω|={} balls={} C_D={} gap={} pairs={} viol={}", omega.len(), cover.balls.len(), cover.certificate.overlap, cover.certificate.max_scale_gap, nb.pairs_checked, nb.violations.len()));
        }
    }
    outcome(ok, detail.join("; "))
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut worst_unity = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let fixtures = [
        ("lattice_box(2,32)", Space::new(lattice_box(2, 32).unwrap()).unwrap(), 2.0),
        ("gasket(5)", gasket_space(5), gasket_beta()),
    ];
    for (_, s, beta) in &fixtures {
        let psi = ScaleFunction::power(*beta);
        for omega in annuli(s) {
            let cover = whitney_cover(s, &omega, 8.0).unwrap();
            for &p in &[1.5, 2.0] {
                let part = sobolev_partition(s, &cover.plain_balls(), p, BallOrdering::DecreasingRadius, None, &SolveOptions::default()).unwrap();
                let audit = partition_energy_audit(s, &part, &psi, 1e-9).unwrap();
                let bound = 1e3 * audit.c_cap * (1.0 + (part.local_finiteness as f64).powf(p));
                worst_unity = worst_unity.max(part.certificate.unity_defect);
                worst_ratio = worst_ratio.max(audit.c_b / bound);
                ok &= part.certificate.passed(1e-12) && audit.c_b <= bound;
            }
        }
    }
    outcome(ok, format!("unity defect {worst_unity:.1e}, max C_B / bound {worst_ratio:.3e}"))
}

fn random_blend_max(level: usize, p: f64, trials: usize, seed: u64) -> (bool, bool, f64) {
    let s = gasket_space(level);
    let psi = ScaleFunction::power(gasket_beta());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut agree, mut finite, mut max) = (true, true, 0.0f64);
    let d = s.diameter();
    for _ in 0..trials {
        let f: Vec<f64> = (0..s.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..s.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = rng.random_range(0..s.n());
        let r = s.snap_radius(x, rng.random_range(d / 16.0..d / 2.0));
        let res = whitney_blend(&s, &f, &g, &Ball::new(x, r), 0.5, p, 8.0, &SolveOptions::default()).unwrap();
        agree &= res.boundary_agreement();
        let e = blend_energy_report(&s, &res, &psi).unwrap();
        finite &= e.finite();
        max = max.max(e.ratio);
    }
    (agree, finite, max)
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for &p in &[1.5, 2.0] {
        let (a4, f4, m4) = random_blend_max(4, p, 100, 7);
        let (a3, f3, m3) = random_blend_max(3, p, 100, 7);
        let factor = m4.max(m3) / m4.min(m3);
        ok &= a4 && f4 && a3 && f3 && factor <= 2.0;
        detail.push(format!("p={p}: max C_WB {m3:.4} (level 3) vs {m4:.4} (level 4), factor {factor:.3}"));
    }
    outcome(ok, detail.join("; "))
}

fn criterion_8() -> Outcome {
    let s = lattice16();
    let b = Ball::new(MID16, 4.5);
    let double = s.ball_members(&b.scaled(2.0));
    let members = double.members();
    let mut worst_level = 0.0f64;
    let mut worst_sum = f64::INFINITY;
    let mut worst_super = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for &p in &[1.5, 2.0, 3.0] {
        let cut = capacity_minimizer(&s, &b, p, &SolveOptions::default()).unwrap();
        worst_super = worst_super.min(check_superharmonic(s.graph(), &cut.values, &double, p, 50, 3).unwrap().worst_slack);
        for trial in 0..100 {
            let amp = 10f64.powf(rng.random_range(-3.0..3.0));
            let mut g = vec![0.0; s.n()];
            if trial % 2 == 0 {
                for &x in &members {
                    g[x] = amp * rng.random_range(-1.0..1.0);
                }
            } else {
                let c = members[rng.random_range(0..members.len())];
                let w = rng.random_range(1.0..6.0);
                for &x in &members {
                    g[x] = amp * (w - s.d(c, x)).max(0.0);
                }
            }
            let a = mazya_truncation_audit(s.graph(), &cut.values, &g, &double, p).unwrap();
            worst_level = worst_level.min(a.worst_level_slack());
            worst_sum = worst_sum.min(a.summed_slack);
        }
    }
    let ok = worst_level >= -1e-9 && worst_sum >= -1e-9 && worst_super >= -1e-8;
    outcome(ok, format!("worst per-level slack {worst_level:.2e}, summed slack {worst_sum:.2e}, superharmonic slack {worst_super:.2e}"))
}

fn criterion_9() -> Outcome {
    let s = lattice16();
    let psi = ScaleFunction::power(2.0);
    let lambda = 8.0;
    let mut ok = true;
    let mut optimal = Vec::new();
    let mut detail = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut bad_bound, mut bad_split, mut bad_const) = (0, 0, 0);
    for &r in &[4.0, 8.0] {
        let b = Ball::new(MID16, r);
        let cut = capacity_minimizer(&s, &b, 2.0, &SolveOptions::default()).unwrap();
        let opt = cs_constant(&s, &b, 2.0, lambda, &cut, &RatioOptions::default()).unwrap();
        let mut tests: Vec<Vec<f64>> = vec![(0..s.n()).map(|x| s.d(MID16, x) / r).collect(), (0..s.n()).map(|x| (x % 16) as f64).collect(), opt.witness.clone()];
        for _ in 0..10 {
            tests.push((0..s.n()).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        let mut min_c = f64::INFINITY;
        for f in &tests {
            let rep = constructive_cs_pipeline(&s, &b, f, 2.0, 0.5, lambda, 8.0, &psi, &SolveOptions::default()).unwrap();
            bad_bound += usize::from(!rep.bound_holds);
            bad_split += usize::from(!rep.split_holds);
            bad_const += usize::from(rep.constant < opt.value);
            min_c = min_c.min(rep.constant);
        }
        optimal.push(opt.value);
        detail.push(format!("r={r}: C_CS {:.4}, smallest pipeline C {min_c:.4}", opt.value));
    }
    let spread = optimal[0].max(optimal[1]) / optimal[0].min(optimal[1]);
    ok &= spread <= 3.0 && bad_bound + bad_split + bad_const == 0;
    outcome(
        ok,
        format!("{}; spread {spread:.3}; failures: bound {bad_bound}, split {bad_split}, constant {bad_const}", detail.join(", ")),
    )
}

fn criterion_10() -> Outcome {
    let s = lattice16();
    let psi = ScaleFunction::power(2.0);
    let mut ok = true;
    let mut detail = Vec::new();
    for &r in &[4.0, 8.0] {
        let b = Ball::new(MID16, r);
        let e = cs_equivalence_check(&s, &b, 2.0, 2.0, &psi, &RatioOptions::default(), 1e-12).unwrap();
        ok &= e.passed();
        detail.push(format!(
            "r={r}: C_CS {:.4} <= {:.4}, C_cl {:.4} <= {:.4}",
            e.c_cs, e.implied_cs, e.c_classical, e.implied_classical
        ));
    }
    outcome(ok, detail.join("; "))
}

fn criterion_11() -> Outcome {
    let (t, lam) = (7.3, -2.5);
    let mut worst = 0.0f64;
    for (s, beta, b) in [(Space::new(lattice_box(2, 8).unwrap()).unwrap(), 2.0, Ball::new(3 + 8 * 3, 2.5)), (gasket_space(3), gasket_beta(), Ball::new(0, 0.3))] {
        let st = s.with_graph(s.graph().scale_conductances(t));
        let psi = ScaleFunction::power(beta);
        let psi_t = psi.scaled(1.0 / t);
        for &p in &[1.5, 2.0] {
            let opts = RatioOptions::default();
            let a = poincare_constant(&s, &b, p, 2.0, &psi, &opts).unwrap();
            let at = poincare_constant(&st, &b, p, 2.0, &psi_t, &opts).unwrap();
            worst = worst.max(rel(a.value, at.value));
            let cut = capacity_minimizer(&s, &b, p, &SolveOptions::default()).unwrap();
            let cut_t = capacity_minimizer(&st, &b, p, &SolveOptions::default()).unwrap();
            let c = cs_constant(&s, &b, p, 2.0, &cut, &opts).unwrap();
            let ct = cs_constant(&st, &b, p, 2.0, &cut_t, &opts).unwrap();
            worst = worst.max(rel(c.value, ct.value));
            // the same witness scaled by λ
            let prob = poincare_problem(&s, &b, p, 2.0).unwrap();
            let scaled: Vec<f64> = a.witness.iter().map(|v| lam * v).collect();
            worst = worst.max(rel(prob.ratio(&a.witness), prob.ratio(&scaled)));

            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let f: Vec<f64> = (0..s.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..s.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (fl, gl): (Vec<f64>, Vec<f64>) = (f.iter().map(|v| lam * v).collect(), g.iter().map(|v| lam * v).collect());
            let opt = SolveOptions::default();
            let w = blend_energy_report(&s, &whitney_blend(&s, &f, &g, &b, 0.5, p, 8.0, &opt).unwrap(), &psi).unwrap().ratio;
            let wt = blend_energy_report(&st, &whitney_blend(&st, &fl, &gl, &b, 0.5, p, 8.0, &opt).unwrap(), &psi_t).unwrap().ratio;
            worst = worst.max(rel(w, wt));
        }
    }
    outcome(worst <= 1e-9, format!("max relative change {worst:.2e}"))
}

type Criterion = (usize, &'static str, fn() -> Outcome, u64);

fn main() {
    let all: [Criterion; 11] = [
        (1, "axiom suite", criterion_1, 30),
        (2, "capacity oracle", criterion_2, 10),
        (3, "p=2 cross-method", criterion_3, 120),
        (4, "brute-force oracle", criterion_4, 300),
        (5, "whitney cover certificates", criterion_5, 60),
        (6, "partition certificates", criterion_6, 60),
        (7, "blending", criterion_7, 300),
        (8, "log-caccioppoli and maz'ya", criterion_8, 120),
        (9, "constructive cs pipeline", criterion_9, 300),
        (10, "equivalence", criterion_10, 120),
        (11, "invariance", criterion_11, 60),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run, limit) in all {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = out.passed && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name} ({}) [{:.1}s / {limit}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
