//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion fails that is not on the known-red list, or
//! when a known-red criterion starts passing. `PHASEMIX_CRITERIA=1,4`
//! restricts the run to the listed criteria.

use std::time::Instant;

use rand::Rng;

use phasemix::coarse::{check_single_giant, coarse_field, BlockGrid};
use phasemix::estimators::{
    binder_crossing, equilibrium_mean, hitting_stats, ldp_thermodynamic_integration, magnetization_ldp_probe,
    polymer_tail_scan, relaxation_compare, tv_plugin, wsm_within_phase_scan, BandConfig, EmpiricalLaw, Reference,
    SamplerBudget, SiteChoice, SupportKind, TiConfig, WsmBudget,
};
use phasemix::geometry::{
    build_box, build_torus, edge_expansion_exact, random_regular, tree_like_defect, Graph, Rational, RegularGraphSpec,
};
use phasemix::glauber::{
    run_replica, ChainMode, ChainState, CouplingBundle, EventStream, InitDistribution, Observable, ProbeSchedule,
    ReplicaSeeds,
};
use phasemix::ising::{IsingSystem, ModelParams, SpinBoundary, SpinConfig};
use phasemix::oracle::{detailed_balance_suite, enumerate_gibbs, es_identity_suite};
use phasemix::random_cluster::{RcBoundaryPartition, RcParams, SwendsenWang};
use phasemix::reveal::{reveal_coupling, ConditionalSampler, RevealConfig};
use phasemix::seed::{derive_seed, rng_from_seed};
use phasemix::unionfind::UnionFind;

const MASTER: u64 = 20_240_601;

/// Criteria expected to fail, with the reason. Analysis lives in the
/// decisions ledger.
const KNOWN_RED: &[(u32, &str)] = &[(
    5,
    "beta = 0.8 is below the critical point ln(1+sqrt 2) = 0.881 of the exp(-beta|cut|) model, so the restricted chain has no bottleneck at n = 16",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn triangle() -> Graph {
    Graph::general(3, vec![[0, 1], [1, 2], [0, 2]]).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, g) in [("triangle", triangle()), ("torus3x3", build_torus(2, 3).unwrap())] {
        for beta in [0.3, 0.8] {
            let params = ModelParams::new(beta).unwrap();
            let sys = IsingSystem::new(&g, params, SpinBoundary::none()).unwrap();
            let exact = enumerate_gibbs(&g, &params, &SpinBoundary::none()).unwrap().full;
            let n = g.vertex_count();
            let mut law = EmpiricalLaw::new(SupportKind::WindowPatch { sites: n });
            let master = derive_seed(MASTER, &format!("c1/{name}/{beta}"));
            for r in 0..1_000_000 {
                let (st, _) = run_replica(
                    &sys,
                    &InitDistribution::PlusMinus,
                    ChainMode::Plain,
                    ReplicaSeeds::new(master, r),
                    50.0,
                    &ProbeSchedule::none(),
                )
                .unwrap();
                law.push(st.sigma.code());
            }
            let tv = tv_plugin(&law, Reference::Exact(&exact)).unwrap();
            worst = worst.max(tv.estimate);
            parts.push(format!("{name}@{beta}: {:.4}", tv.estimate));
        }
    }
    outcome(worst <= 0.02, format!("max TV {worst:.4} <= 0.02 ({})", parts.join(", ")))
}

fn criterion_2() -> Outcome {
    let reports = detailed_balance_suite(&[0.0, 0.3, 0.8, 1.5]).unwrap();
    let worst = reports.iter().map(|r| r.max_violation).fold(0.0, f64::max);
    outcome(reports.iter().all(|r| r.pass), format!("{} checks, max violation {worst:.2e} <= 1e-12", reports.len()))
}

fn criterion_3() -> Outcome {
    let reports = es_identity_suite(&[0.3, 0.8, 1.5]).unwrap();
    let identities = reports.iter().filter(|r| !r.check.contains("largest")).map(|r| r.max_violation).fold(0.0, f64::max);
    let excess = reports.iter().filter(|r| r.check.contains("largest")).map(|r| r.max_violation).fold(f64::MIN, f64::max);
    outcome(
        reports.iter().all(|r| r.pass),
        format!("free/plus identities max TV {identities:.2e}; largest-plus gap minus bound at most {excess:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let g = build_torus(2, 16).unwrap();
    let n = g.vertex_count();
    let mut violations = 0u64;
    let mut pairs = 0u64;
    for beta in [0.0, 0.5, 1.5] {
        let sys = IsingSystem::new(&g, ModelParams::new(beta).unwrap(), SpinBoundary::none()).unwrap();
        for r in 0..10_000 {
            let mut b = CouplingBundle::new(EventStream::new(derive_seed(MASTER, &format!("c4/{beta}/{r}")), n));
            b.push(&sys, ChainState::new(SpinConfig::all_plus(n), ChainMode::Plain));
            b.push(&sys, ChainState::new(SpinConfig::all_minus(n), ChainMode::Plain));
            let s = b.grand_coupling_run(100.0).unwrap();
            violations += s.order_violations;
            violations += (!b.chains[0].sigma.dominates(&b.chains[1].sigma)) as u64;
            pairs += 1;
        }
    }
    outcome(violations == 0, format!("{violations} order violations over {pairs} coupled pairs"))
}

fn criterion_5() -> Outcome {
    let g = build_torus(2, 16).unwrap();
    let n = g.vertex_count();
    let sys = IsingSystem::new(&g, ModelParams::new(0.8).unwrap(), SpinBoundary::none()).unwrap();
    let s = hitting_stats(&sys, &InitDistribution::AllPlus, ChainMode::RestrictedPlus, 1000.0, 100, derive_seed(MASTER, "c5/main"))
        .unwrap();
    let survival = s.at(1000.0);
    let cap0 = 10.0 * (n * n) as f64;
    let sys0 = IsingSystem::new(&g, ModelParams::new(0.0).unwrap(), SpinBoundary::none()).unwrap();
    let s0 = hitting_stats(&sys0, &InitDistribution::AllPlus, ChainMode::RestrictedPlus, cap0, 100, derive_seed(MASTER, "c5/control"))
        .unwrap();
    let control = s0.at(cap0);
    let median_hit = s.times.get(s.times.len() / 2).copied().unwrap_or(f64::INFINITY);
    outcome(
        survival >= 0.99 && control < 0.5,
        format!(
            "survival at t=1000 is {survival:.2} (need >= 0.99, median hit {median_hit:.1}); beta=0 control survival {control:.2} < 0.5"
        ),
    )
}

fn criterion_6(beta_c: f64) -> Outcome {
    let beta = 1.5 * beta_c;
    let mut est = Vec::new();
    let mut direct = Vec::new();
    for n in [8, 12, 16] {
        let g = build_torus(2, n).unwrap();
        let e = ldp_thermodynamic_integration(&g, beta, 0.2, TiConfig::default(), derive_seed(MASTER, &format!("c6/{n}")))
            .unwrap();
        let d = magnetization_ldp_probe(&[g], beta, 0.2, SamplerBudget::new(100_000, 100), derive_seed(MASTER, &format!("c6/direct/{n}")))
            .unwrap();
        direct.push(match d[0].upper_bound {
            Some(u) => format!("n={n} 0 hits (<= {u:.1e})"),
            None => format!("n={n} {:.2e}", d[0].estimate),
        });
        est.push((n, e.log_prob, e.log_half_width));
    }
    let separated = est.windows(2).all(|w| w[1].1 + w[1].2 < w[0].1 - w[0].2);
    let shown: Vec<String> = est.iter().map(|(n, l, h)| format!("n={n} ln p={l:.2}+-{h:.2}")).collect();
    outcome(
        separated,
        format!("beta_c_hat={beta_c:.4}, beta={beta:.4}: {}; direct SW {}", shown.join(", "), direct.join(", ")),
    )
}

fn criterion_7(beta: f64) -> Outcome {
    let g = build_torus(2, 32).unwrap();
    let budget = WsmBudget { samples: 100_000, burn_in: 200, target_half_width: None };
    let r = wsm_within_phase_scan(&g, beta, 0, &[2, 4, 8], budget, derive_seed(MASTER, "c7")).unwrap();
    let nonincreasing = (0..2).all(|i| r.tv[i + 1] <= r.tv[i] + r.half_width[i] + r.half_width[i + 1]);
    let shown: Vec<String> = (0..3).map(|i| format!("r={} {:.4}+-{:.4}", r.radii[i], r.tv[i], r.half_width[i])).collect();
    outcome(nonincreasing && r.tv[2] <= 0.05, format!("single-site TV {}", shown.join(", ")))
}

fn criterion_8(beta: f64) -> Outcome {
    let g = build_torus(2, 32).unwrap();
    let sys = IsingSystem::new(&g, ModelParams::new(beta).unwrap(), SpinBoundary::none()).unwrap();
    let obs = Observable::AbsMagnetizationDensity;
    let reference =
        equilibrium_mean(&sys, obs, SamplerBudget::new(20_000, 200), &mut rng_from_seed(derive_seed(MASTER, "c8/ref"))).unwrap();
    let cfg = BandConfig { horizon: 2000.0, ..Default::default() };
    let inits = [InitDistribution::PlusMinus, InitDistribution::Strip { width_fraction: 0.25 }];
    let res = relaxation_compare(&sys, &inits, ChainMode::Plain, obs, reference, &cfg, 20, derive_seed(MASTER, "c8")).unwrap();
    let denom = res[0].median.max(cfg.probe_interval);
    let ratio = res[1].median / denom;
    outcome(
        ratio >= 5.0,
        format!(
            "reference E|M|/N={reference:.4}; median time-to-band nu+-={} strip={} ratio {ratio:.1} >= 5",
            res[0].median, res[1].median
        ),
    )
}

fn criterion_9() -> Outcome {
    let g = build_torus(2, 128).unwrap();
    let mut sw = SwendsenWang::new(&g, ModelParams::from_p(0.9).unwrap(), &SpinBoundary::none()).unwrap();
    let mut sigma = SpinConfig::all_plus(g.vertex_count());
    let mut rng = rng_from_seed(derive_seed(MASTER, "c9"));
    for _ in 0..50 {
        sw.step(&mut sigma, &mut rng);
    }
    let grids = [BlockGrid::new(&g, 4).unwrap(), BlockGrid::new(&g, 8).unwrap()];
    let mut violations = 0usize;
    let mut density = [0.0f64; 2];
    let samples = 1000;
    for _ in 0..samples {
        let omega = sw.step(&mut sigma, &mut rng);
        for (i, grid) in grids.iter().enumerate() {
            let field = coarse_field(grid, &omega);
            violations += check_single_giant(&g, grid, &field, &omega).len();
            density[i] += field.bad_density() / samples as f64;
        }
    }
    outcome(
        violations == 0 && density[1] < density[0] && density[0] < 0.05,
        format!(
            "{violations} violations over {samples} fields per k; bad density k=4 {:.5}, k=8 {:.5}",
            density[0], density[1]
        ),
    )
}

fn criterion_10() -> Outcome {
    let g = build_box(2, 4).unwrap();
    let rc = RcParams::new(0.9, 2.0).unwrap();
    let (wired, free) = (RcBoundaryPartition::wired(&g), RcBoundaryPartition::free(&g));
    let cfg = RevealConfig { k: 1, inner_radius: 2, sampler: ConditionalSampler::Exact };
    let (mut runs, mut successes, mut good, mut errors, mut approximate) = (0u64, 0u64, 0u64, 0u64, 0u64);
    while successes < 1000 && runs < 20_000 {
        let mut rng = rng_from_seed(derive_seed(MASTER, &format!("c10/{runs}")));
        runs += 1;
        match reveal_coupling(&g, rc, &wired, &free, cfg, &mut rng) {
            Ok(o) if o.success => {
                successes += 1;
                good += o.checks.is_some_and(|c| c.holds()) as u64;
                approximate += o.approximate as u64;
            }
            Ok(_) => {}
            Err(_) => errors += 1,
        }
    }
    outcome(
        successes == 1000 && good == successes && errors == 0 && approximate == 0,
        format!(
            "{good}/{successes} successful runs with equal interiors and partitions; {runs} runs, failure rate {:.3}, {errors} sampler errors",
            1.0 - successes as f64 / runs as f64
        ),
    )
}

/// Minimum number of edge deletions leaving the graph `(n, edges)`
/// acyclic, by exhaustive search over deletion sets of growing size.
fn brute_force_defect(n: usize, edges: &[[u32; 2]]) -> usize {
    let acyclic_without = |skip: &[usize]| {
        let mut uf = UnionFind::new(n);
        edges.iter().enumerate().all(|(i, e)| skip.contains(&i) || uf.union(e[0] as usize, e[1] as usize))
    };
    fn search(start: usize, left: usize, m: usize, chosen: &mut Vec<usize>, ok: &dyn Fn(&[usize]) -> bool) -> bool {
        if left == 0 {
            return ok(chosen);
        }
        for i in start..m {
            chosen.push(i);
            if search(i + 1, left - 1, m, chosen, ok) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    (0..=edges.len()).find(|&k| search(0, k, edges.len(), &mut Vec::new(), &acyclic_without)).unwrap()
}

fn ball_edges(g: &Graph, v: usize, r: usize) -> (usize, Vec<[u32; 2]>) {
    let mut dist = vec![usize::MAX; g.vertex_count()];
    let mut order = vec![v];
    dist[v] = 0;
    let mut i = 0;
    while i < order.len() {
        let u = order[i];
        i += 1;
        if dist[u] == r {
            continue;
        }
        for &w in g.neighbors(u) {
            if dist[w as usize] == usize::MAX {
                dist[w as usize] = dist[u] + 1;
                order.push(w as usize);
            }
        }
    }
    let mut local = vec![u32::MAX; g.vertex_count()];
    for (i, &u) in order.iter().enumerate() {
        local[u] = i as u32;
    }
    let edges = g
        .edges()
        .iter()
        .filter(|e| local[e[0] as usize] != u32::MAX && local[e[1] as usize] != u32::MAX)
        .map(|e| [local[e[0] as usize], local[e[1] as usize]])
        .collect();
    (order.len(), edges)
}

fn criterion_11() -> Outcome {
    let k4 = random_regular(RegularGraphSpec { n: 4, degree: 3, seed: 1 }).unwrap();
    let zeta = edge_expansion_exact(&k4).unwrap();
    let mut pick = rng_from_seed(derive_seed(MASTER, "c11/balls"));
    let mut mismatches = 0;
    let mut defects = [0usize; 4];
    for i in 0..100u64 {
        let g = random_regular(RegularGraphSpec { n: 64, degree: 3, seed: derive_seed(MASTER, &format!("c11/rrg/{i}")) }).unwrap();
        let v = pick.gen_range(0..64);
        let r = 1 + (i as usize % 3);
        let fast = tree_like_defect(&g, v, r).unwrap();
        let (n, edges) = ball_edges(&g, v, r);
        mismatches += (fast != brute_force_defect(n, &edges)) as usize;
        defects[fast.min(3)] += 1;
    }
    let g = random_regular(RegularGraphSpec { n: 128, degree: 3, seed: derive_seed(MASTER, "c11/polymer-graph") }).unwrap();
    let p = polymer_tail_scan(
        &g,
        1.5,
        SamplerBudget::new(1_000_000, 200),
        &SiteChoice::RandomPerSample,
        None,
        derive_seed(MASTER, "c11/polymer"),
    )
    .unwrap();
    let range = p.hat.observed_range(25);
    let decreasing = p.hat.strictly_decreasing(25);
    outcome(
        zeta == Rational::new(2, 1) && mismatches == 0 && decreasing,
        format!(
            "K4 expansion {zeta}; defect mismatches {mismatches}/100 (defects 0/1/2/3+: {defects:?}); polymer tail over l in {range:?} strictly decreasing: {decreasing}"
        ),
    )
}

fn main() {
    let start = Instant::now();
    let selected: Option<Vec<u32>> = std::env::var("PHASEMIX_CRITERIA")
        .ok()
        .map(|v| v.split(',').map(|x| x.trim().parse().expect("PHASEMIX_CRITERIA lists criterion numbers")).collect());
    let wanted = |id: u32| selected.as_ref().is_none_or(|s| s.contains(&id));
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let report = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome, results: &mut Vec<(u32, &str, Outcome)>| {
        if !wanted(id) {
            return;
        }
        let t = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id:>2} {name}: {} ({:.1}s)", o.detail, t.elapsed().as_secs_f64());
        results.push((id, name, o));
    };
    report(1, "glauber oracle equivalence", &criterion_1, &mut results);
    report(2, "restricted-chain reversibility", &criterion_2, &mut results);
    report(3, "edwards-sokal identities", &criterion_3, &mut results);
    report(4, "grand-coupling monotonicity", &criterion_4, &mut results);
    report(5, "hitting-time bottleneck", &criterion_5, &mut results);

    if (6..=8).any(wanted) {
        let t = Instant::now();
        let betas: Vec<f64> = (0..13).map(|i| 0.80 + 0.015 * i as f64).collect();
        let crossing = binder_crossing(
            &build_torus(2, 8).unwrap(),
            &build_torus(2, 16).unwrap(),
            &betas,
            SamplerBudget::new(20_000, 200),
            derive_seed(MASTER, "binder"),
        )
        .expect("Binder curves cross on the grid");
        println!("       binder crossing beta_c_hat = {:.4} ({:.1}s)", crossing.beta_c, t.elapsed().as_secs_f64());
        let beta_c = crossing.beta_c;
        report(6, "surface-order bimodality", &|| criterion_6(beta_c), &mut results);
        report(7, "wsm within a phase", &|| criterion_7(1.5 * beta_c), &mut results);
        report(8, "nu+- vs strip relaxation", &|| criterion_8(1.5 * beta_c), &mut results);
    }
    report(9, "coarse-graining soundness", &criterion_9, &mut results);
    report(10, "revealing coupling", &criterion_10, &mut results);
    report(11, "random regular graph suite", &criterion_11, &mut results);
    finish(start, results);
}

fn finish(start: Instant, results: Vec<(u32, &str, Outcome)>) {
    let mut unexpected = Vec::new();
    for (id, name, o) in &results {
        let known = KNOWN_RED.iter().find(|k| k.0 == *id);
        match (o.pass, known) {
            (false, None) => unexpected.push(format!("criterion {id} ({name}) failed")),
            (true, Some(_)) => unexpected.push(format!("criterion {id} ({name}) passes but is listed as known red")),
            _ => {}
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria pass in {:.1}s", results.len(), start.elapsed().as_secs_f64());
    for (id, why) in KNOWN_RED.iter().filter(|k| results.iter().any(|r| r.0 == k.0)) {
        println!("known red: criterion {id}: {why}");
    }
    if !unexpected.is_empty() {
        for u in &unexpected {
            println!("unexpected: {u}");
        }
        std::process::exit(1);
    }
}
