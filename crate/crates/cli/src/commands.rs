//! One function per subcommand. Each reads the merged configuration,
//! derives its streams from the master seed and hands every output file to
//! the collector. The return value is false when a check failed.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use phasemix::coarse::{check_single_giant, classify_e_m_theta, coarse_field, find_separating_surface, BlockGrid};
use phasemix::estimators::{
    binder_crossing, clopper_pearson, equilibrium_mean, hitting_stats, ldp_thermodynamic_integration,
    magnetization_ldp_probe, polymer_tail_scan, relaxation_compare, wsm_within_phase_scan, BandConfig, PolymerTail,
    SamplerBudget, SiteChoice, TiConfig, WsmBudget, Z95,
};
use phasemix::geometry::{edge_expansion_exact, random_regular, tree_like_defect, Graph, GraphKind, RegularGraphSpec,
    EXPANSION_VERTEX_CAP};
use phasemix::glauber::{run_replica, Observable, ProbeSchedule, ReplicaSeeds};
use phasemix::ising::{IsingSystem, ModelParams, SpinBoundary, SpinConfig};
use phasemix::oracle::{check_sw_stationarity, detailed_balance_suite, es_identity_suite, oracle_suite, OracleReport};
use phasemix::random_cluster::{BondConfig, RcBoundaryPartition, RcParams, SwendsenWang};
use phasemix::reveal::{reveal_coupling, ConditionalSampler, RevealConfig};
use phasemix::seed::{derive_seed, rng_from_seed};

use crate::config::ExperimentConfig;
use crate::manifest::{Collector, ScanCsv};

const ORACLE_BETAS: [f64; 4] = [0.0, 0.3, 0.8, 1.5];
// the ES coupling needs p > 0
const ES_BETAS: [f64; 3] = [0.3, 0.8, 1.5];
const SW_STATIONARITY_TOLERANCE: f64 = 1e-12;

fn binomial_half_width(p: f64, n: u64) -> f64 {
    if n == 0 { f64::INFINITY } else { Z95 * (p * (1.0 - p) / n as f64).sqrt() }
}

/// Derives and records a child seed.
fn stream(cfg: &ExperimentConfig, col: &mut Collector, label: &str) -> Result<u64> {
    let s = derive_seed(cfg.seed()?, label);
    col.seed(label, s);
    Ok(s)
}

/// `beta`, or `beta_factor · β̂_c` with `β̂_c` from a Binder crossing.
pub fn resolve_beta(cfg: &ExperimentConfig, col: &mut Collector) -> Result<f64> {
    let Some(factor) = cfg.beta_factor else {
        return cfg.beta.context("key `beta` (or `beta_factor`) is required");
    };
    if cfg.beta.is_some() {
        bail!("keys `beta` and `beta_factor` are exclusive");
    }
    let sides = cfg.binder_sides.clone().unwrap_or_else(|| vec![8, 16]);
    if sides.len() != 2 {
        bail!("key `binder_sides` needs exactly two sizes");
    }
    let betas = cfg.binder_betas.clone().unwrap_or_else(|| (0..13).map(|i| 0.80 + 0.015 * i as f64).collect());
    let dim = cfg.dim.unwrap_or(2);
    let small = phasemix::geometry::build_torus(dim, sides[0])?;
    let large = phasemix::geometry::build_torus(dim, sides[1])?;
    let budget = SamplerBudget::new(cfg.binder_samples.unwrap_or(20_000), cfg.burn_in_sweeps.unwrap_or(200));
    let seed = stream(cfg, col, "binder")?;
    let bc = binder_crossing(&small, &large, &betas, budget, seed)?;
    let mut csv = String::from("beta,binder_small,binder_large\n");
    for ((b, s), l) in bc.betas.iter().zip(&bc.small).zip(&bc.large) {
        let _ = writeln!(csv, "{b},{s},{l}");
    }
    col.write("binder.csv", &csv)?;
    col.write("beta.csv", &format!("beta_factor,beta_c,beta\n{factor},{},{}\n", bc.beta_c, factor * bc.beta_c))?;
    Ok(factor * bc.beta_c)
}

fn spin_boundary(cfg: &ExperimentConfig, g: &Graph) -> Result<SpinBoundary> {
    if g.kind != GraphKind::Box {
        return Ok(SpinBoundary::none());
    }
    match cfg.boundary.as_deref().unwrap_or("plus") {
        "plus" => Ok(SpinBoundary::all_plus(g)),
        "minus" => Ok(SpinBoundary::all_minus(g)),
        other => bail!("key `boundary`: spin boundary must be plus or minus, got {other:?}"),
    }
}

fn rc_boundary(name: Option<&str>, default: &str, key: &str, g: &Graph) -> Result<RcBoundaryPartition> {
    match name.unwrap_or(default) {
        "wired" => Ok(RcBoundaryPartition::wired(g)),
        "free" => Ok(RcBoundaryPartition::free(g)),
        other => bail!("key `{key}`: must be wired or free, got {other:?}"),
    }
}

fn observable(cfg: &ExperimentConfig) -> Result<Observable> {
    let name = cfg.observable.as_deref().unwrap_or("magnetization");
    Ok(match name {
        "magnetization" => Observable::Magnetization,
        "abs-magnetization-density" => Observable::AbsMagnetizationDensity,
        "energy" => Observable::Energy,
        s if s.starts_with("spin:") => {
            Observable::Spin(s[5..].parse().with_context(|| format!("key `observable`: bad vertex in {s:?}"))?)
        }
        other => bail!("key `observable`: unknown value {other:?}"),
    })
}

fn rc_params(cfg: &ExperimentConfig, col: &mut Collector) -> Result<ModelParams> {
    match cfg.bond_probability {
        Some(p) if cfg.beta.is_none() && cfg.beta_factor.is_none() => Ok(ModelParams::from_p(p)?),
        Some(_) => bail!("key `bond_probability` excludes `beta` and `beta_factor`"),
        None => Ok(ModelParams::new(resolve_beta(cfg, col)?)?),
    }
}

pub fn simulate(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let g = cfg.geometry()?;
    let beta = resolve_beta(cfg, col)?;
    let sys = IsingSystem::new(&g, ModelParams::new(beta)?, spin_boundary(cfg, &g)?)?;
    let mode = cfg.mode()?;
    let inits = cfg.inits(&["all-plus"])?;
    let horizon = cfg.horizon_continuous_time.unwrap_or(10.0);
    let probes = ProbeSchedule {
        interval: cfg.probe_interval_continuous_time.unwrap_or(1.0),
        observables: vec![observable(cfg)?],
    };
    let replicas = cfg.replicas.unwrap_or(4);
    let mut csv = String::from("init,replica,seed,t,observable,value\n");
    let mut fin = String::from("init,replica,magnetization,events,restricted_fires\n");
    for (i, init) in inits.iter().enumerate() {
        let master = stream(cfg, col, &format!("simulate/{i}"))?;
        let runs: Vec<_> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let seeds = ReplicaSeeds::new(master, r);
                run_replica(&sys, init, mode, seeds, horizon, &probes).map(|(s, t)| (seeds, s, t))
            })
            .collect::<phasemix::Result<_>>()?;
        for (r, (seeds, state, traj)) in runs.iter().enumerate() {
            col.seed(&format!("simulate/{i}/replica/{r}/updates"), seeds.updates);
            col.seed(&format!("simulate/{i}/replica/{r}/coin"), seeds.coin);
            for row in traj.to_csv_rows(seeds.updates).lines() {
                let _ = writeln!(csv, "{},{r},{row}", init.label());
            }
            let _ = writeln!(
                fin,
                "{},{r},{},{},{}",
                init.label(),
                state.sigma.magnetization(),
                traj.events,
                traj.restricted_fires
            );
        }
    }
    col.write("trajectories.csv", &csv)?;
    col.write("final.csv", &fin)?;
    Ok(true)
}

/// SW bond samples on the edges of `g`, after `burn_in_sweeps` moves.
fn sample_bonds(cfg: &ExperimentConfig, col: &mut Collector, g: &Graph, label: &str) -> Result<Vec<BondConfig>> {
    let params = rc_params(cfg, col)?;
    let mut sw = SwendsenWang::new(g, params, &spin_boundary(cfg, g)?)?;
    let mut rng = rng_from_seed(stream(cfg, col, label)?);
    let mut sigma = SpinConfig::all_plus(g.vertex_count());
    for _ in 0..cfg.burn_in_sweeps.unwrap_or(50) {
        sw.step(&mut sigma, &mut rng);
    }
    Ok((0..cfg.samples.unwrap_or(10))
        .map(|_| {
            let full = sw.step(&mut sigma, &mut rng);
            sw.free_part(&full)
        })
        .collect())
}

pub fn rc(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let g = cfg.geometry()?;
    let (mut bonds, mut csv) = (String::new(), String::from("sample,open_edges,edges,open_fraction\n"));
    for (i, omega) in sample_bonds(cfg, col, &g, "rc")?.iter().enumerate() {
        bonds.push_str(&omega.to_text());
        let m = omega.len().max(1);
        let _ = writeln!(csv, "{i},{},{},{}", omega.open_count(), omega.len(), omega.open_count() as f64 / m as f64);
    }
    col.write("bonds.txt", &bonds)?;
    col.write("rc.csv", &csv)?;
    Ok(true)
}

/// Splits a file of concatenated two-line bond records.
fn read_bonds(text: &str) -> Result<Vec<BondConfig>> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if !lines.len().is_multiple_of(2) {
        bail!("bond file has a dangling header");
    }
    lines.chunks(2).map(|c| Ok(BondConfig::from_text(&format!("{}\n{}\n", c[0], c[1]))?)).collect()
}

pub fn coarse(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let g = cfg.geometry()?;
    let configs = match &cfg.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            read_bonds(&text)?
        }
        None if cfg.master_seed.is_some() => sample_bonds(cfg, col, &g, "coarse")?,
        None => bail!("key `input` (a bond file written by `rc`) is required unless a seed is given"),
    };
    let ks = match (&cfg.ks, cfg.k) {
        (Some(ks), _) => ks.clone(),
        (None, Some(k)) => vec![k],
        (None, None) => bail!("key `k` (or `ks`) is required"),
    };
    let mut fields = String::new();
    let mut csv = String::from("k,sample,bad_blocks,bad_density,single_giant_violations,surface_exists,e_m_theta\n");
    let mut summary = ScanCsv::default();
    let mut total_violations = 0;
    for k in ks {
        let grid = BlockGrid::new(&g, k)?;
        let mut densities = Vec::with_capacity(configs.len());
        for (i, omega) in configs.iter().enumerate() {
            if omega.len() != g.edge_count() {
                bail!("sample {i} has {} edges, the geometry has {}", omega.len(), g.edge_count());
            }
            let field = coarse_field(&grid, omega);
            let violations = check_single_giant(&g, &grid, &field, omega).len();
            total_violations += violations;
            let surface = match (g.kind, cfg.inner_radius) {
                (GraphKind::Box, Some(l)) => find_separating_surface(&grid, &g, &field, l)?.exists.to_string(),
                _ => String::new(),
            };
            let theta = match cfg.theta {
                Some(t) => classify_e_m_theta(&grid, omega, None, t)?.to_string(),
                None => String::new(),
            };
            fields.push_str(&field.to_text());
            densities.push(field.bad_density());
            let _ = writeln!(csv, "{k},{i},{},{},{violations},{surface},{theta}", field.bad_count(), field.bad_density());
        }
        let n = densities.len() as f64;
        let mean = densities.iter().sum::<f64>() / n.max(1.0);
        let var = densities.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        summary.row("bad_density", k, mean, Z95 * (var / n.max(1.0)).sqrt(), densities.len() as u64);
    }
    if total_violations > 0 {
        eprintln!("{total_violations} single-giant violations");
    }
    col.write("fields.txt", &fields)?;
    col.write("coarse.csv", &csv)?;
    col.write("coarse_summary.csv", &summary.finish())?;
    Ok(total_violations == 0)
}

pub fn wsm_scan(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let g = cfg.geometry()?;
    let beta = resolve_beta(cfg, col)?;
    let radii = cfg.radii.clone().unwrap_or_else(|| vec![2, 4, 8]);
    let budget = WsmBudget {
        samples: cfg.samples.unwrap_or(10_000),
        burn_in: cfg.burn_in_sweeps.unwrap_or(100),
        target_half_width: None,
    };
    let seed = stream(cfg, col, "wsm")?;
    let res = wsm_within_phase_scan(&g, beta, cfg.center_vertex.unwrap_or(0), &radii, budget, seed)?;
    let mut csv = ScanCsv::default();
    for (i, r) in res.radii.iter().enumerate() {
        csv.row("site_radius", r, res.tv[i], res.half_width[i], res.n_samples);
    }
    for (i, r) in res.radii.iter().enumerate() {
        csv.row("patch_radius", r, res.patch_tv[i], res.patch_half_width[i], res.n_samples);
    }
    col.write("wsm.csv", &csv.finish())?;
    Ok(true)
}

/// Order-statistic 95% interval for the median, reported as a half-width.
fn median_half_width(times: &[f64]) -> f64 {
    let mut v = times.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    if v.is_empty() {
        return f64::INFINITY;
    }
    let d = Z95 * n.sqrt() / 2.0;
    let lo = ((n / 2.0 - d).floor().max(0.0)) as usize;
    let hi = ((n / 2.0 + d).ceil() as usize).min(v.len() - 1);
    if v[hi].is_infinite() { f64::INFINITY } else { (v[hi] - v[lo]) / 2.0 }
}

pub fn mix_compare(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let g = cfg.geometry()?;
    let beta = resolve_beta(cfg, col)?;
    let sys = IsingSystem::new(&g, ModelParams::new(beta)?, spin_boundary(cfg, &g)?)?;
    let obs = observable(cfg)?;
    let inits = cfg.inits(&["plus-minus", "strip"])?;
    let band = BandConfig {
        relative_band: cfg.band_relative.unwrap_or(0.05),
        dwell_probes: cfg.dwell_probes.unwrap_or(10),
        window_probes: cfg.window_probes.unwrap_or(1),
        probe_interval: cfg.probe_interval_continuous_time.unwrap_or(1.0),
        horizon: cfg.horizon_continuous_time.unwrap_or(1000.0),
    };
    let mut rng = rng_from_seed(stream(cfg, col, "mix/reference")?);
    let reference =
        equilibrium_mean(&sys, obs, SamplerBudget::new(cfg.samples.unwrap_or(2000), cfg.burn_in_sweeps.unwrap_or(100)), &mut rng)?;
    let seed = stream(cfg, col, "mix/replicas")?;
    let replicas = cfg.replicas.unwrap_or(20);
    let results = relaxation_compare(&sys, &inits, cfg.mode()?, obs, reference, &band, replicas, seed)?;
    let mut csv = ScanCsv::default();
    let mut times = String::from("init,replica,time_to_band\n");
    for r in &results {
        csv.row("init", &r.init, r.median, median_half_width(&r.times), r.times.len() as u64);
        for (i, t) in r.times.iter().enumerate() {
            let _ = writeln!(times, "{},{i},{t}", r.init);
        }
    }
    col.write("mix_compare.csv", &csv.finish())?;
    col.write("times.csv", &times)?;
    Ok(true)
}

pub fn ldp_probe(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let sides = cfg.sides.clone().or(cfg.side.map(|s| vec![s])).unwrap_or_else(|| vec![8, 12, 16]);
    let graphs: Vec<Graph> = sides.iter().map(|&s| cfg.geometry_with_side(Some(s))).collect::<Result<_>>()?;
    let beta = resolve_beta(cfg, col)?;
    let eps = cfg.epsilon.unwrap_or(0.2);
    let method = cfg.method.as_deref().unwrap_or("direct");
    if !matches!(method, "direct" | "ti" | "both") {
        bail!("key `method`: must be direct, ti or both, got {method:?}");
    }
    let mut csv = ScanCsv::default();
    if method != "ti" {
        let budget = SamplerBudget::new(cfg.samples.unwrap_or(10_000), cfg.burn_in_sweeps.unwrap_or(100));
        let seed = stream(cfg, col, "ldp/direct")?;
        for (side, e) in sides.iter().zip(magnetization_ldp_probe(&graphs, beta, eps, budget, seed)?) {
            csv.row("direct_prob", side, e.estimate, e.half_width, e.n_samples);
            if let Some(ub) = e.upper_bound {
                csv.row("direct_upper_bound", side, ub, 0.0, e.n_samples);
            }
        }
    }
    if method != "direct" {
        let d = TiConfig::default();
        let ti = TiConfig {
            grid_step: cfg.ti_grid_step.unwrap_or(d.grid_step),
            burn_in_sweeps: cfg.burn_in_sweeps.unwrap_or(d.burn_in_sweeps),
            sweeps: cfg.ti_sweeps.unwrap_or(d.sweeps),
            replicates: cfg.ti_replicates.unwrap_or(d.replicates),
            ..d
        };
        for (side, g) in sides.iter().zip(&graphs) {
            let seed = stream(cfg, col, &format!("ldp/ti/{side}"))?;
            let e = ldp_thermodynamic_integration(g, beta, eps, ti, seed)?;
            csv.row("ti_log_prob", side, e.log_prob, e.log_half_width, e.replicate_logs.len() as u64);
        }
    }
    col.write("ldp.csv", &csv.finish())?;
    Ok(true)
}

pub fn hit_stats(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let g = cfg.geometry()?;
    let beta = resolve_beta(cfg, col)?;
    let sys = IsingSystem::new(&g, ModelParams::new(beta)?, spin_boundary(cfg, &g)?)?;
    let t_cap = cfg.t_cap_continuous_time.context("key `t_cap_continuous_time` is required")?;
    let replicas = cfg.replicas.unwrap_or(100);
    let mode = cfg.mode()?;
    let mut csv = ScanCsv::default();
    let mut surv = String::from("init,t,survival\n");
    for (i, init) in cfg.inits(&["plus-minus"])?.iter().enumerate() {
        let seed = stream(cfg, col, &format!("hit/{i}"))?;
        let curve = hitting_stats(&sys, init, mode, t_cap, replicas, seed)?;
        let s = curve.at(t_cap);
        csv.row("init", init.label(), s, binomial_half_width(s, curve.observations as u64), curve.observations as u64);
        for (t, p) in curve.times.iter().zip(&curve.survival) {
            let _ = writeln!(surv, "{},{t},{p}", init.label());
        }
    }
    col.write("hit_stats.csv", &csv.finish())?;
    col.write("survival.csv", &surv)?;
    Ok(true)
}

fn tail_rows(csv: &mut ScanCsv, law: &str, tail: &PolymerTail) {
    let n = tail.observations;
    for l in 1..tail.boundary_counts.len() {
        let p = tail.tail(l);
        csv.row(law, l, p, binomial_half_width(p, n), n);
    }
}

pub fn polymer_tail(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let g = cfg.geometry()?;
    let beta = resolve_beta(cfg, col)?;
    let budget = SamplerBudget::new(cfg.samples.unwrap_or(10_000), cfg.burn_in_sweeps.unwrap_or(100));
    let sites = match cfg.center_vertex {
        Some(v) => SiteChoice::Fixed(vec![v]),
        None => SiteChoice::RandomPerSample,
    };
    let ball = cfg.ball_radius.map(|r| (cfg.center_vertex.unwrap_or(0), r));
    let seed = stream(cfg, col, "polymer")?;
    let res = polymer_tail_scan(&g, beta, budget, &sites, ball, seed)?;
    let mut csv = ScanCsv::default();
    tail_rows(&mut csv, "hat_boundary_tail", &res.hat);
    if let Some(t) = &res.tilde {
        tail_rows(&mut csv, "tilde_boundary_tail", t);
    }
    col.write("polymer_tail.csv", &csv.finish())?;
    Ok(true)
}

pub fn reveal_couple(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let g = cfg.geometry()?;
    if g.kind != GraphKind::Box {
        bail!("key `geometry`: the revealing coupling runs on a box");
    }
    let rc = match (cfg.bond_probability, cfg.beta) {
        (Some(p), None) => RcParams::new(p, 2.0)?,
        (None, Some(_)) | (None, None) => RcParams::ising(&ModelParams::new(resolve_beta(cfg, col)?)?),
        (Some(_), Some(_)) => bail!("key `bond_probability` excludes `beta`"),
    };
    let xi = rc_boundary(cfg.boundary.as_deref(), "wired", "boundary", &g)?;
    let xi_prime = rc_boundary(cfg.boundary_prime.as_deref(), "free", "boundary_prime", &g)?;
    let sampler = match cfg.sampler.as_deref().unwrap_or("exact") {
        "exact" => ConditionalSampler::Exact,
        "mcmc" => ConditionalSampler::Mcmc { burn_in_sweeps: cfg.burn_in_sweeps.unwrap_or(200) },
        other => bail!("key `sampler`: must be exact or mcmc, got {other:?}"),
    };
    let rc_cfg = RevealConfig {
        k: cfg.k.unwrap_or(1),
        inner_radius: cfg.inner_radius.context("key `inner_radius` is required")?,
        sampler,
    };
    let runs = cfg.replicas.unwrap_or(100);
    let master = stream(cfg, col, "reveal")?;
    let outcomes: Vec<_> = (0..runs)
        .into_par_iter()
        .map(|i| reveal_coupling(&g, rc, &xi, &xi_prime, rc_cfg, &mut rng_from_seed(derive_seed(master, &format!("run/{i}")))))
        .collect::<phasemix::Result<_>>()?;
    let mut rows = String::from("run,success,interior_equal,partitions_equal,steps,max_cftp_sweeps,approximate\n");
    let (mut successes, mut good) = (0u64, 0u64);
    for (i, o) in outcomes.iter().enumerate() {
        let (ie, pe) = o.checks.as_ref().map_or((String::new(), String::new()), |c| {
            (c.interior_equal.to_string(), c.partitions_equal.to_string())
        });
        successes += o.success as u64;
        good += (o.success && o.checks.as_ref().is_some_and(|c| c.holds())) as u64;
        let _ = writeln!(rows, "{i},{},{ie},{pe},{},{},{}", o.success, o.steps, o.max_cftp_sweeps, o.approximate);
    }
    let n = runs as u64;
    let rate = successes as f64 / n.max(1) as f64;
    let mut csv = ScanCsv::default();
    csv.row("success_rate", rc_cfg.inner_radius, rate, binomial_half_width(rate, n), n);
    let (lo, hi) = clopper_pearson(successes - good, successes.max(1), 0.05);
    csv.row("check_failure_rate", rc_cfg.inner_radius, (successes - good) as f64 / successes.max(1) as f64, (hi - lo) / 2.0, successes);
    col.write("reveal.csv", &csv.finish())?;
    col.write("runs.csv", &rows)?;
    Ok(good == successes)
}

fn sw_stationarity_suite(betas: &[f64]) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    for inst in oracle_suite() {
        for &b in betas {
            let v = check_sw_stationarity(&inst.graph, &ModelParams::new(b)?, &inst.bc)?;
            out.push(OracleReport::new(inst.name, "sw-stationarity", b, v, SW_STATIONARITY_TOLERANCE));
        }
    }
    Ok(out)
}

pub fn oracle_check(suite: &str, col: &mut Collector) -> Result<bool> {
    let mut reports = Vec::new();
    if matches!(suite, "detailed-balance" | "all") {
        reports.extend(detailed_balance_suite(&ORACLE_BETAS)?);
    }
    if matches!(suite, "es-identity" | "all") {
        reports.extend(es_identity_suite(&ES_BETAS)?);
    }
    if matches!(suite, "sw-stationarity" | "all") {
        reports.extend(sw_stationarity_suite(&ORACLE_BETAS)?);
    }
    let mut csv = String::from("instance,check,beta,max_violation,tolerance,pass\n");
    for r in &reports {
        let _ = writeln!(csv, "{},{},{},{:e},{:e},{}", r.instance, r.check, r.beta, r.max_violation, r.tolerance, r.pass);
        if !r.pass {
            eprintln!("FAIL {} {} beta={} violation {:e}", r.instance, r.check, r.beta, r.max_violation);
        }
    }
    col.write("oracle.csv", &csv)?;
    Ok(reports.iter().all(|r| r.pass))
}

pub fn rrg_gen(cfg: &ExperimentConfig, col: &mut Collector) -> Result<bool> {
    let spec = RegularGraphSpec {
        n: cfg.vertices.context("key `vertices` is required")?,
        degree: cfg.degree.context("key `degree` is required")?,
        seed: match cfg.graph_seed {
            Some(s) => s,
            None => stream(cfg, col, "rrg")?,
        },
    };
    let g = random_regular(spec)?;
    col.write("graph.txt", &g.to_edge_list())?;
    let expansion = if g.vertex_count() <= EXPANSION_VERTEX_CAP {
        let r = edge_expansion_exact(&g)?;
        format!("{}/{}", r.num, r.den)
    } else {
        String::new()
    };
    let mut stats = String::from("vertices,degree,graph_seed,edge_expansion\n");
    let _ = writeln!(stats, "{},{},{},{expansion}", spec.n, spec.degree, spec.seed);
    col.write("rrg.csv", &stats)?;
    if let Some(radii) = &cfg.radii {
        let v = cfg.center_vertex.unwrap_or(0);
        let mut d = String::from("vertex,radius,tree_like_defect\n");
        for &r in radii {
            let _ = writeln!(d, "{v},{r},{}", tree_like_defect(&g, v, r)?);
        }
        col.write("defect.csv", &d)?;
    }
    Ok(true)
}
