//! Estimators: empirical laws and TV distances, WSM-within-a-phase scans,
//! magnetization large-deviation probes, relaxation and hitting-time
//! statistics, polymer tails and the `g_n(t)` scale function.

use std::collections::VecDeque;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::geometry::{ball, ball_subgraph, Graph, GraphKind};
use crate::glauber::{
    hitting_time, run, ChainMode, ChainState, EventStream, HitResult, InitDistribution, Observable, ProbeSchedule,
    ReplicaSeeds,
};
use crate::ising::{flip_cut_delta, IsingSystem, ModelParams, PhaseTag, SpinBoundary, SpinConfig};
use crate::oracle::ExactLaw;
use crate::random_cluster::{es_color, ColoringMode, RcBoundaryPartition, SwendsenWang};
use crate::seed::{derive_seed, rng_from_seed, Rng};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SupportKind {
    SingleSite,
    /// Joint law of `sites` spins; atom bit `i` is set when site `i` is `+1`.
    WindowPatch { sites: usize },
    /// Atoms `0..=N` index `(M + N) / 2`.
    MagnetizationHistogram { vertices: usize },
}

impl SupportKind {
    pub fn atoms(&self) -> usize {
        match *self {
            SupportKind::SingleSite => 2,
            SupportKind::WindowPatch { sites } => 1 << sites,
            SupportKind::MagnetizationHistogram { vertices } => vertices + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLaw {
    pub support: SupportKind,
    counts: Vec<u64>,
    samples: u64,
}

impl EmpiricalLaw {
    pub fn new(support: SupportKind) -> Self {
        Self { support, counts: vec![0; support.atoms()], samples: 0 }
    }

    pub fn from_counts(support: SupportKind, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != support.atoms() {
            return Err(Error::SupportMismatch { left: counts.len(), right: support.atoms() });
        }
        let samples = counts.iter().sum();
        Ok(Self { support, counts, samples })
    }

    pub fn push(&mut self, atom: usize) {
        self.counts[atom] += 1;
        self.samples += 1;
    }

    pub fn push_spin(&mut self, s: i8) {
        self.push((s > 0) as usize);
    }

    pub fn push_patch(&mut self, spins: impl IntoIterator<Item = i8>) {
        let atom = spins.into_iter().enumerate().fold(0usize, |a, (i, s)| a | (((s > 0) as usize) << i));
        self.push(atom);
    }

    pub fn push_magnetization(&mut self, m: i64) {
        let SupportKind::MagnetizationHistogram { vertices } = self.support else {
            panic!("magnetization pushed into a non-histogram law");
        };
        self.push(((m + vertices as i64) / 2) as usize);
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn probs(&self) -> Vec<f64> {
        let n = self.samples.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// 95% normal-approximation half-width for each atom's frequency.
    pub fn half_widths(&self) -> Vec<f64> {
        let n = self.samples.max(1) as f64;
        self.probs().iter().map(|p| Z95 * (p * (1.0 - p) / n).sqrt()).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Empirical(&'a EmpiricalLaw),
    Exact(&'a ExactLaw),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub half_width: f64,
    pub n_samples: u64,
}

/// Plug-in TV distance. The half-width propagates the per-atom binomial
/// errors through `½ Σ |p̂ - q̂|`.
pub fn tv_plugin(p: &EmpiricalLaw, q: Reference<'_>) -> Result<Estimate> {
    let pp = p.probs();
    let n = p.samples.max(1) as f64;
    let (qq, m): (Vec<f64>, Option<f64>) = match q {
        Reference::Empirical(e) => (e.probs(), Some(e.samples.max(1) as f64)),
        Reference::Exact(law) => (law.probs.clone(), None),
    };
    if pp.len() != qq.len() {
        return Err(Error::SupportMismatch { left: pp.len(), right: qq.len() });
    }
    let mut tv = 0.0;
    let mut hw = 0.0;
    for (a, b) in pp.iter().zip(&qq) {
        tv += (a - b).abs();
        let var = a * (1.0 - a) / n + m.map_or(0.0, |m| b * (1.0 - b) / m);
        hw += Z95 * var.sqrt();
    }
    let n_samples = match q {
        Reference::Empirical(e) => p.samples.min(e.samples),
        Reference::Exact(_) => p.samples,
    };
    Ok(Estimate { estimate: 0.5 * tv, half_width: 0.5 * hw, n_samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerBudget {
    pub samples: usize,
    pub burn_in: usize,
    /// Sampler moves between recorded samples.
    pub thin: usize,
}

impl SamplerBudget {
    pub fn new(samples: usize, burn_in: usize) -> Self {
        Self { samples, burn_in, thin: 1 }
    }
}

/// Visits `budget.samples` configurations from the plus-phase reference:
/// Swendsen–Wang on `g` followed by a largest-cluster-plus recoloring of
/// the bonds.
pub fn sample_phase_reference(
    g: &Graph,
    params: ModelParams,
    budget: SamplerBudget,
    rng: &mut Rng,
    mut visit: impl FnMut(&SpinConfig),
) -> Result<()> {
    let mut sw = SwendsenWang::new(g, params, &SpinBoundary::none())?;
    let mut sigma = SpinConfig::all_plus(g.vertex_count());
    for _ in 0..budget.burn_in {
        sw.step(&mut sigma, rng);
    }
    let xi = RcBoundaryPartition::none();
    for _ in 0..budget.samples {
        let mut omega = sw.step(&mut sigma, rng);
        for _ in 1..budget.thin.max(1) {
            omega = sw.step(&mut sigma, rng);
        }
        let colored = es_color(g, &omega, ColoringMode::LargestPlus, &xi, rng)?;
        visit(&colored);
    }
    Ok(())
}

/// Ball of radius `r` about `v` with all-plus boundary, ready for sampling.
#[derive(Debug, Clone)]
pub struct PlusBall {
    pub sub: Graph,
    /// Sub-index to `g` index; interior vertices come first.
    pub map: Vec<u32>,
    pub interior: usize,
    pub center: usize,
}

impl PlusBall {
    pub fn new(g: &Graph, v: usize, r: usize) -> Result<Self> {
        let view = ball(g, v, r)?;
        let (sub, map) = ball_subgraph(g, &view);
        let center = view.interior.binary_search(&(v as u32)).expect("center in ball");
        Ok(Self { interior: view.interior.len(), sub, map, center })
    }

    /// Sub-index of `g`-vertex `w`, or `None` outside the interior.
    pub fn local(&self, w: usize) -> Option<usize> {
        self.map[..self.interior].binary_search(&(w as u32)).ok()
    }

    /// Lifts a ball sample to `g`, plus outside the ball interior.
    pub fn extend(&self, n: usize, sub_sigma: &SpinConfig) -> SpinConfig {
        let mut spins = vec![1i8; n];
        for (i, &w) in self.map[..self.interior].iter().enumerate() {
            spins[w as usize] = sub_sigma.get(i);
        }
        SpinConfig::from_spins(spins).expect("±1")
    }

    /// Visits samples of `π_{B_r^+}` (SW with the plus shell).
    pub fn sample(
        &self,
        params: ModelParams,
        budget: SamplerBudget,
        rng: &mut Rng,
        mut visit: impl FnMut(&SpinConfig),
    ) -> Result<()> {
        let bc = SpinBoundary::all_plus(&self.sub);
        let mut sw = SwendsenWang::new(&self.sub, params, &bc)?;
        let mut sigma = SpinConfig::all_plus(self.sub.vertex_count());
        for _ in 0..budget.burn_in {
            sw.step(&mut sigma, rng);
        }
        for _ in 0..budget.samples {
            for _ in 0..budget.thin.max(1) {
                sw.step(&mut sigma, rng);
            }
            visit(&sigma);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WsmBudget {
    pub samples: usize,
    pub burn_in: usize,
    pub target_half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsmScanResult {
    pub radii: Vec<usize>,
    pub tv: Vec<f64>,
    pub half_width: Vec<f64>,
    /// TV on the patch `{v} ∪ N(v)`.
    pub patch_tv: Vec<f64>,
    pub patch_half_width: Vec<f64>,
    pub n_samples: u64,
}

/// Patch at `u` matching the neighbor layout of `v`: translated offsets on
/// a torus, `u`'s own neighbor list elsewhere.
fn patch_at(g: &Graph, v: usize, u: usize) -> Vec<usize> {
    let mut out = vec![u];
    if g.kind == GraphKind::Torus {
        let xv = g.coords(v).expect("torus coords").to_vec();
        let xu = g.coords(u).expect("torus coords").to_vec();
        for &w in g.neighbors(v) {
            let xw = g.coords(w as usize).unwrap();
            let shifted: Vec<i32> = (0..g.dim).map(|i| xu[i] + xw[i] - xv[i]).collect();
            out.push(g.index_of(&shifted).expect("torus wraps"));
        }
    } else {
        out.extend(g.neighbors(u).iter().map(|&w| w as usize));
    }
    out
}

/// For each radius, single-site and patch TV between the plus-boundary ball
/// marginal at `v` and the plus-phase reference. On a torus the reference
/// reads a uniformly random translate of the patch in each sample.
pub fn wsm_within_phase_scan(
    g: &Graph,
    beta: f64,
    v: usize,
    radii: &[usize],
    budget: WsmBudget,
    seed: u64,
) -> Result<WsmScanResult> {
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
    }
    let max_r = radii.last().copied().unwrap_or(0);
    match g.kind {
        GraphKind::Torus if 2 * max_r >= g.side => {
            return Err(Error::BallWraps { radius: max_r, side: g.side });
        }
        GraphKind::General => {
            let degree = g.max_degree().max(2) as f64;
            let limit = 0.5 * (g.vertex_count() as f64).ln() / degree.ln();
            if max_r as f64 >= limit.max(1.0) {
                return Err(Error::InvalidParameter(format!("radius {max_r} exceeds half the log-size {limit:.2}")));
            }
        }
        _ => {}
    }
    let params = ModelParams::new(beta)?;
    let sb = SamplerBudget::new(budget.samples, budget.burn_in);
    let patch_v = patch_at(g, v, v);
    let patch_support = SupportKind::WindowPatch { sites: patch_v.len() };

    let mut rng = rng_from_seed(derive_seed(seed, "wsm/reference"));
    let mut pick = rng_from_seed(derive_seed(seed, "wsm/reference-site"));
    let mut ref_site = EmpiricalLaw::new(SupportKind::SingleSite);
    let mut ref_patch = EmpiricalLaw::new(patch_support);
    let transitive = g.kind == GraphKind::Torus;
    sample_phase_reference(g, params, sb, &mut rng, |s| {
        let u = if transitive { pick.gen_range(0..g.vertex_count()) } else { v };
        let patch = patch_at(g, v, u);
        ref_site.push_spin(s.get(u));
        ref_patch.push_patch(patch.iter().map(|&w| s.get(w)));
    })?;

    let mut out = WsmScanResult {
        radii: radii.to_vec(),
        tv: Vec::new(),
        half_width: Vec::new(),
        patch_tv: Vec::new(),
        patch_half_width: Vec::new(),
        n_samples: budget.samples as u64,
    };
    for &r in radii {
        let pb = PlusBall::new(g, v, r)?;
        let locals: Vec<Option<usize>> = patch_v.iter().map(|&w| pb.local(w)).collect();
        let mut site = EmpiricalLaw::new(SupportKind::SingleSite);
        let mut patch = EmpiricalLaw::new(patch_support);
        let mut rng = rng_from_seed(derive_seed(seed, &format!("wsm/ball/{r}")));
        pb.sample(params, sb, &mut rng, |s| {
            site.push_spin(s.get(pb.center));
            patch.push_patch(locals.iter().map(|l| l.map_or(1, |i| s.get(i))));
        })?;
        let t = tv_plugin(&site, Reference::Empirical(&ref_site))?;
        let tp = tv_plugin(&patch, Reference::Empirical(&ref_patch))?;
        if let Some(target) = budget.target_half_width {
            if t.half_width > target {
                return Err(Error::BudgetExhausted(format!(
                    "radius {r}: half-width {:.4} above target {target}",
                    t.half_width
                )));
            }
        }
        out.tv.push(t.estimate);
        out.half_width.push(t.half_width);
        out.patch_tv.push(tp.estimate);
        out.patch_half_width.push(tp.half_width);
    }
    Ok(out)
}

/// Two-sided Clopper–Pearson interval at confidence `1 - alpha`.
pub fn clopper_pearson(hits: u64, n: u64, alpha: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (hits as f64, n as f64);
    let lo = if hits == 0 { 0.0 } else { Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(alpha / 2.0) };
    let hi = if hits as f64 == n { 1.0 } else { Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(1.0 - alpha / 2.0) };
    (lo, hi)
}

/// `ln` of the uniform-measure probability that `|M| ≤ εN`.
pub fn log_binomial_magnetization_mass(n: usize, eps: f64) -> f64 {
    let mut log_c = 0.0f64;
    let mut terms = Vec::new();
    for k in 0..=n {
        if k > 0 {
            log_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let m = 2 * k as i64 - n as i64;
        if (m.unsigned_abs() as f64) <= eps * n as f64 + 1e-9 {
            terms.push(log_c);
        }
    }
    log_sum_exp(&terms) - n as f64 * std::f64::consts::LN_2
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpEstimate {
    pub vertices: usize,
    pub estimate: f64,
    pub half_width: f64,
    pub hits: u64,
    pub n_samples: u64,
    /// Clopper–Pearson upper bound, reported when no sample hit.
    pub upper_bound: Option<f64>,
}

/// Direct SW estimate of `π(|M|/N ≤ ε)` for each graph.
pub fn magnetization_ldp_probe(
    graphs: &[Graph],
    beta: f64,
    eps: f64,
    budget: SamplerBudget,
    seed: u64,
) -> Result<Vec<LdpEstimate>> {
    let params = ModelParams::new(beta)?;
    graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let n = g.vertex_count();
            let mut rng = rng_from_seed(derive_seed(seed, &format!("ldp/{i}")));
            let mut sw = SwendsenWang::new(g, params, &SpinBoundary::none())?;
            let mut sigma = SpinConfig::all_plus(n);
            for _ in 0..budget.burn_in {
                sw.step(&mut sigma, &mut rng);
            }
            let mut hits = 0u64;
            for _ in 0..budget.samples {
                for _ in 0..budget.thin.max(1) {
                    sw.step(&mut sigma, &mut rng);
                }
                if (sigma.magnetization().unsigned_abs() as f64) <= eps * n as f64 + 1e-9 {
                    hits += 1;
                }
            }
            let ns = budget.samples as u64;
            let p = hits as f64 / ns.max(1) as f64;
            Ok(LdpEstimate {
                vertices: n,
                estimate: p,
                half_width: Z95 * (p * (1.0 - p) / ns.max(1) as f64).sqrt(),
                hits,
                n_samples: ns,
                upper_bound: (hits == 0).then(|| clopper_pearson(0, ns, 0.05).1),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiConfig {
    /// Target spacing of the inverse-temperature grid.
    pub grid_step: f64,
    pub burn_in_sweeps: usize,
    pub sweeps: usize,
    pub sw_burn_in: usize,
    pub sw_samples: usize,
    pub replicates: usize,
}

impl Default for TiConfig {
    fn default() -> Self {
        Self { grid_step: 0.04, burn_in_sweeps: 100, sweeps: 400, sw_burn_in: 50, sw_samples: 400, replicates: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiEstimate {
    pub vertices: usize,
    pub log_prob: f64,
    /// Student-t 95% half-width of `log_prob` over replicates.
    pub log_half_width: f64,
    pub replicate_logs: Vec<f64>,
}

impl TiEstimate {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// Glauber restricted to `|M| ≤ bound` by rejecting exits; tracks the cut.
struct WindowChain {
    sigma: SpinConfig,
    cut: i64,
    bound: i64,
}

impl WindowChain {
    fn sweep(&mut self, sys: &IsingSystem<'_>, rng: &mut Rng) {
        let n = sys.vertex_count();
        for _ in 0..n {
            let v = rng.gen_range(0..n);
            let s = if rng.gen::<f64>() <= sys.prob_plus(self.sigma.spins(), v) { 1 } else { -1 };
            let old = self.sigma.get(v);
            if s == old || (self.sigma.magnetization() + 2 * s as i64).abs() > self.bound {
                continue;
            }
            self.cut += flip_cut_delta(sys.graph, &self.sigma, &sys.bc, v);
            self.sigma.set(v, s);
        }
    }
}

/// Thermodynamic-integration estimate of `ln π_β(|M| ≤ εN)`:
/// `ln P_0(A) - ∫_0^β (E_b[cut | A] - E_b[cut]) db`, with the conditional
/// mean from window-restricted Glauber started on a zero-magnetization strip,
/// the unconditional mean from SW, and trapezoid quadrature. Replicates are
/// independent and give the half-width.
pub fn ldp_thermodynamic_integration(g: &Graph, beta: f64, eps: f64, cfg: TiConfig, seed: u64) -> Result<TiEstimate> {
    if cfg.replicates < 2 || cfg.grid_step <= 0.0 {
        return Err(Error::InvalidParameter("need at least two replicates and a positive grid step".into()));
    }
    let n = g.vertex_count();
    let bound = (eps * n as f64 + 1e-9).floor() as i64;
    let start = InitDistribution::Strip { width_fraction: 0.5 }.sample(g, &mut rng_from_seed(0))?;
    if start.magnetization().abs() > bound {
        return Err(Error::InvalidParameter("strip start lies outside the magnetization window".into()));
    }
    let points = (beta / cfg.grid_step).ceil().max(1.0) as usize;
    let h = beta / points as f64;
    let log_p0 = log_binomial_magnetization_mass(n, eps);
    let replicate = |r: usize| -> Result<f64> {
        let mut rng = rng_from_seed(derive_seed(seed, &format!("ti/{r}/glauber")));
        let mut sw_rng = rng_from_seed(derive_seed(seed, &format!("ti/{r}/sw")));
        let cut0 = crate::ising::cut_size(g, &start, &SpinBoundary::none()) as i64;
        let mut chain = WindowChain { sigma: start.clone(), cut: cut0, bound };
        let mut free = SpinConfig::all_plus(n);
        let mut integrand = Vec::with_capacity(points + 1);
        for i in 0..=points {
            let params = ModelParams::new(i as f64 * h)?;
            let sys = IsingSystem::new(g, params, SpinBoundary::none())?;
            for _ in 0..cfg.burn_in_sweeps {
                chain.sweep(&sys, &mut rng);
            }
            let mut acc = 0.0;
            for _ in 0..cfg.sweeps {
                chain.sweep(&sys, &mut rng);
                acc += chain.cut as f64;
            }
            let cond = acc / cfg.sweeps.max(1) as f64;
            let mut sw = SwendsenWang::new(g, params, &SpinBoundary::none())?;
            for _ in 0..cfg.sw_burn_in {
                sw.step(&mut free, &mut sw_rng);
            }
            let mut acc = 0.0;
            for _ in 0..cfg.sw_samples {
                sw.step(&mut free, &mut sw_rng);
                acc += sys.cut_size(&free) as f64;
            }
            integrand.push(cond - acc / cfg.sw_samples.max(1) as f64);
        }
        let integral = h * (integrand.iter().sum::<f64>() - 0.5 * (integrand[0] + integrand[points]));
        Ok(log_p0 - integral)
    };
    let logs: Vec<f64> = (0..cfg.replicates).into_par_iter().map(replicate).collect::<Result<_>>()?;
    let r = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / r;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let t = StudentsT::new(0.0, 1.0, r - 1.0).unwrap().inverse_cdf(0.975);
    Ok(TiEstimate { vertices: n, log_prob: mean, log_half_width: t * (var / r).sqrt(), replicate_logs: logs })
}

/// Binder cumulant `1 - ⟨M⁴⟩ / (3⟨M²⟩²)` from SW samples.
pub fn binder_cumulant(g: &Graph, beta: f64, budget: SamplerBudget, rng: &mut Rng) -> Result<f64> {
    let params = ModelParams::new(beta)?;
    let mut sw = SwendsenWang::new(g, params, &SpinBoundary::none())?;
    let mut sigma = SpinConfig::all_plus(g.vertex_count());
    for _ in 0..budget.burn_in {
        sw.step(&mut sigma, rng);
    }
    let n = g.vertex_count() as f64;
    let (mut m2, mut m4) = (0.0, 0.0);
    for _ in 0..budget.samples {
        for _ in 0..budget.thin.max(1) {
            sw.step(&mut sigma, rng);
        }
        let x = (sigma.magnetization() as f64 / n).powi(2);
        m2 += x;
        m4 += x * x;
    }
    let s = budget.samples.max(1) as f64;
    let (m2, m4) = (m2 / s, m4 / s);
    Ok(1.0 - m4 / (3.0 * m2 * m2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinderCrossing {
    pub betas: Vec<f64>,
    pub small: Vec<f64>,
    pub large: Vec<f64>,
    pub beta_c: f64,
}

/// Locates the crossing of the Binder curves of two system sizes on a
/// `β` grid by linear interpolation of their difference. The first change
/// of sign from `large < small` to `large ≥ small` is taken.
pub fn binder_crossing(small: &Graph, large: &Graph, betas: &[f64], budget: SamplerBudget, seed: u64) -> Result<BinderCrossing> {
    if betas.len() < 2 || betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("β grid must be increasing with at least two points".into()));
    }
    let curve = |g: &Graph, tag: &str| -> Result<Vec<f64>> {
        betas
            .par_iter()
            .enumerate()
            .map(|(i, &b)| binder_cumulant(g, b, budget, &mut rng_from_seed(derive_seed(seed, &format!("binder/{tag}/{i}")))))
            .collect()
    };
    let us = curve(small, "small")?;
    let ul = curve(large, "large")?;
    let diff: Vec<f64> = ul.iter().zip(&us).map(|(a, b)| a - b).collect();
    for i in 0..diff.len() - 1 {
        if diff[i] < 0.0 && diff[i + 1] >= 0.0 {
            let frac = diff[i] / (diff[i] - diff[i + 1]);
            let beta_c = betas[i] + frac * (betas[i + 1] - betas[i]);
            return Ok(BinderCrossing { betas: betas.to_vec(), small: us, large: ul, beta_c });
        }
    }
    Err(Error::BudgetExhausted("Binder curves do not cross on the β grid".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    /// Half-width of the band relative to the reference value.
    pub relative_band: f64,
    pub dwell_probes: usize,
    /// Length of the trailing running-mean window, in probes.
    pub window_probes: usize,
    pub probe_interval: f64,
    pub horizon: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self { relative_band: 0.05, dwell_probes: 10, window_probes: 1, probe_interval: 1.0, horizon: 1000.0 }
    }
}

/// First probe time from which the running mean stays in the band for
/// `dwell_probes` consecutive probes; `∞` when not reached.
pub fn time_to_band(series: &[(f64, f64)], reference: f64, cfg: &BandConfig) -> f64 {
    let w = cfg.window_probes.max(1);
    let tol = cfg.relative_band * reference.abs();
    let mut acc: VecDeque<f64> = VecDeque::with_capacity(w);
    let mut sum = 0.0;
    let mut run_start: Option<usize> = None;
    let mut run_len = 0usize;
    for (j, &(_, x)) in series.iter().enumerate() {
        acc.push_back(x);
        sum += x;
        if acc.len() > w {
            sum -= acc.pop_front().unwrap();
        }
        let mean = sum / acc.len() as f64;
        if (mean - reference).abs() <= tol {
            run_start.get_or_insert(j);
            run_len += 1;
            if run_len >= cfg.dwell_probes.max(1) {
                return series[run_start.unwrap()].0;
            }
        } else {
            run_start = None;
            run_len = 0;
        }
    }
    f64::INFINITY
}

/// Median with `∞` entries sorting last; even lengths average the middle pair.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len() / 2;
    if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) }
}

/// SW estimate of an observable's equilibrium mean.
pub fn equilibrium_mean(sys: &IsingSystem<'_>, observable: Observable, budget: SamplerBudget, rng: &mut Rng) -> Result<f64> {
    let mut sw = SwendsenWang::new(sys.graph, sys.params, &sys.bc)?;
    let mut sigma = SpinConfig::all_plus(sys.vertex_count());
    for _ in 0..budget.burn_in {
        sw.step(&mut sigma, rng);
    }
    let mut acc = 0.0;
    for _ in 0..budget.samples {
        for _ in 0..budget.thin.max(1) {
            sw.step(&mut sigma, rng);
        }
        acc += observable.evaluate(sys, &sigma);
    }
    Ok(acc / budget.samples.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationResult {
    pub init: String,
    /// Per-replica time-to-band; `∞` when not reached by the horizon.
    pub times: Vec<f64>,
    pub median: f64,
}

/// Per initialization, the time-to-band of `observable` over `replicas`
/// independent runs.
pub fn relaxation_compare(
    sys: &IsingSystem<'_>,
    inits: &[InitDistribution],
    mode: ChainMode,
    observable: Observable,
    reference: f64,
    cfg: &BandConfig,
    replicas: usize,
    seed: u64,
) -> Result<Vec<RelaxationResult>> {
    let probes = ProbeSchedule { interval: cfg.probe_interval, observables: vec![observable] };
    inits
        .iter()
        .enumerate()
        .map(|(i, init)| {
            let master = derive_seed(seed, &format!("relax/{i}"));
            let times: Vec<f64> = (0..replicas)
                .into_par_iter()
                .map(|r| -> Result<f64> {
                    let seeds = ReplicaSeeds::new(master, r);
                    let sigma = init.sample(sys.graph, &mut rng_from_seed(seeds.coin))?;
                    let mut state = ChainState::new(sigma, mode);
                    let mut stream = EventStream::new(seeds.updates, sys.vertex_count());
                    let traj = run(sys, &mut state, &mut stream, cfg.horizon, &probes);
                    Ok(time_to_band(&traj.series(observable), reference, cfg))
                })
                .collect::<Result<_>>()?;
            Ok(RelaxationResult { init: init.label().to_string(), median: median(&times), times })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// Distinct event times, increasing.
    pub times: Vec<f64>,
    /// `P̂(τ > times[i])`.
    pub survival: Vec<f64>,
    pub censored: usize,
    pub observations: usize,
}

impl SurvivalCurve {
    /// Right-continuous step function `P̂(τ > t)`.
    pub fn at(&self, t: f64) -> f64 {
        match self.times.iter().rposition(|&s| s <= t) {
            Some(i) => self.survival[i],
            None => 1.0,
        }
    }
}

/// Kaplan–Meier estimate from `(time, observed)` pairs; `observed = false`
/// marks a censored time.
pub fn kaplan_meier(obs: &[(f64, bool)]) -> SurvivalCurve {
    let mut v = obs.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut at_risk = v.len();
    let mut s = 1.0;
    let (mut times, mut survival) = (Vec::new(), Vec::new());
    let mut i = 0;
    while i < v.len() {
        let t = v[i].0;
        let mut deaths = 0;
        let mut leaving = 0;
        while i < v.len() && v[i].0 == t {
            deaths += v[i].1 as usize;
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            times.push(t);
            survival.push(s);
        }
        at_risk -= leaving;
    }
    SurvivalCurve { times, survival, censored: obs.iter().filter(|o| !o.1).count(), observations: obs.len() }
}

/// Survival of the hitting time of the phase boundary (`0 ≤ M ≤ 1` for plus
/// and plain modes, `-1 ≤ M ≤ 0` for the minus restriction), censored at `t_cap`.
pub fn hitting_stats(
    sys: &IsingSystem<'_>,
    init: &InitDistribution,
    mode: ChainMode,
    t_cap: f64,
    replicas: usize,
    seed: u64,
) -> Result<SurvivalCurve> {
    let target = if mode == ChainMode::RestrictedMinus { PhaseTag::MinusBoundary } else { PhaseTag::PlusBoundary };
    let obs: Vec<(f64, bool)> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<(f64, bool)> {
            let seeds = ReplicaSeeds::new(seed, r);
            let sigma = init.sample(sys.graph, &mut rng_from_seed(seeds.coin))?;
            let mut state = ChainState::new(sigma, mode);
            let mut stream = EventStream::new(seeds.updates, sys.vertex_count());
            Ok(match hitting_time(sys, &mut state, &mut stream, target, t_cap) {
                HitResult::Hit(t) => (t, true),
                HitResult::NotHit => (t_cap, false),
            })
        })
        .collect::<Result<_>>()?;
    Ok(kaplan_meier(&obs))
}

/// Maximal connected set of `-1` spins containing `w` (empty if `σ_w = +1`).
pub fn minus_cluster(g: &Graph, sigma: &SpinConfig, w: usize) -> Vec<u32> {
    if sigma.get(w) > 0 {
        return Vec::new();
    }
    let mut seen = vec![false; g.vertex_count()];
    let mut out = vec![w as u32];
    seen[w] = true;
    let mut i = 0;
    while i < out.len() {
        let u = out[i] as usize;
        i += 1;
        for &x in g.neighbors(u) {
            if !seen[x as usize] && sigma.get(x as usize) < 0 {
                seen[x as usize] = true;
                out.push(x);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Number of edges with exactly one endpoint in `set`.
pub fn edge_boundary(g: &Graph, set: &[u32]) -> usize {
    let mut inside = vec![false; g.vertex_count()];
    for &v in set {
        inside[v as usize] = true;
    }
    g.edges().iter().filter(|e| inside[e[0] as usize] != inside[e[1] as usize]).count()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolymerTail {
    /// `boundary_counts[ℓ]` = number of observations with `|∂_e γ_w| = ℓ`.
    pub boundary_counts: Vec<u64>,
    pub volume_counts: Vec<u64>,
    pub observations: u64,
}

impl PolymerTail {
    pub fn record(&mut self, g: &Graph, sigma: &SpinConfig, w: usize) {
        let gamma = minus_cluster(g, sigma, w);
        let b = edge_boundary(g, &gamma);
        bump(&mut self.boundary_counts, b);
        bump(&mut self.volume_counts, gamma.len());
        self.observations += 1;
    }

    /// `P̂(|∂_e γ_w| ≥ ℓ)`.
    pub fn tail(&self, l: usize) -> f64 {
        let c: u64 = self.boundary_counts.iter().skip(l).sum();
        c as f64 / self.observations.max(1) as f64
    }

    /// `P̂(|∂_e γ_w| = ℓ)`.
    pub fn frequency(&self, l: usize) -> f64 {
        self.boundary_counts.get(l).copied().unwrap_or(0) as f64 / self.observations.max(1) as f64
    }

    fn tail_count(&self, l: usize) -> u64 {
        self.boundary_counts.iter().skip(l).sum()
    }

    /// `[ℓ_min, ℓ_max]`: from the smallest positive boundary size seen to the
    /// largest `ℓ` whose tail holds at least `min_tail_count` observations.
    pub fn observed_range(&self, min_tail_count: u64) -> Option<(usize, usize)> {
        let lo = (1..self.boundary_counts.len()).find(|&l| self.boundary_counts[l] > 0)?;
        let hi = (lo..self.boundary_counts.len()).rev().find(|&l| self.tail_count(l) >= min_tail_count)?;
        Some((lo, hi))
    }

    /// Whether `ln P̂(|∂_e γ_w| ≥ ℓ)` strictly decreases at every step of the
    /// observed range.
    pub fn strictly_decreasing(&self, min_tail_count: u64) -> bool {
        match self.observed_range(min_tail_count) {
            Some((lo, hi)) if hi > lo => (lo..hi).all(|l| self.tail_count(l + 1) < self.tail_count(l)),
            _ => false,
        }
    }
}

fn bump(v: &mut Vec<u64>, i: usize) {
    if v.len() <= i {
        v.resize(i + 1, 0);
    }
    v[i] += 1;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolymerTailResult {
    /// Minus clusters under the plus-phase reference samples.
    pub hat: PolymerTail,
    /// Minus clusters of `σ⁺ ∧ σ̂`, pairing samples in order.
    pub tilde: Option<PolymerTail>,
}

/// Polymer statistics of the vertices `ws` over `hat` samples, and over
/// the pointwise minima with `plus` samples when given (lifted to `g` with
/// `+1` outside the ball).
pub fn polymer_tail(g: &Graph, ws: &[usize], hat: &[SpinConfig], plus: &[SpinConfig]) -> Result<PolymerTailResult> {
    let n = g.vertex_count();
    if hat.iter().chain(plus).any(|s| s.len() != n) || ws.iter().any(|&w| w >= n) {
        return Err(Error::InvalidParameter("sample or vertex does not fit the graph".into()));
    }
    let mut out = PolymerTailResult { hat: PolymerTail::default(), tilde: None };
    for s in hat {
        for &w in ws {
            out.hat.record(g, s, w);
        }
    }
    if !plus.is_empty() {
        let mut t = PolymerTail::default();
        for (a, b) in plus.iter().zip(hat) {
            let m = a.meet(b);
            assert!(a.dominates(&m) && b.dominates(&m), "meet is below both arguments");
            for &w in ws {
                t.record(g, &m, w);
            }
        }
        out.tilde = Some(t);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "sites")]
pub enum SiteChoice {
    All,
    Fixed(Vec<usize>),
    /// One uniformly random vertex per sample, so observations are independent.
    RandomPerSample,
}

/// Streaming form of [`polymer_tail`]: draws `budget.samples` plus-phase
/// reference samples and records the chosen sites. With `tilde_ball =
/// Some((v, r))` a plus-boundary ball chain about `v` runs alongside and
/// `γ_v(σ⁺ ∧ σ̂)` is recorded too.
pub fn polymer_tail_scan(
    g: &Graph,
    beta: f64,
    budget: SamplerBudget,
    sites: &SiteChoice,
    tilde_ball: Option<(usize, usize)>,
    seed: u64,
) -> Result<PolymerTailResult> {
    let n = g.vertex_count();
    if let SiteChoice::Fixed(ws) = sites {
        if ws.iter().any(|&w| w >= n) {
            return Err(Error::InvalidParameter("site outside the graph".into()));
        }
    }
    let params = ModelParams::new(beta)?;
    let mut pick = rng_from_seed(derive_seed(seed, "polymer/site"));
    let mut ball_rng = rng_from_seed(derive_seed(seed, "polymer/ball"));
    let mut ball = match tilde_ball {
        Some((v, r)) => {
            let pb = PlusBall::new(g, v, r)?;
            let mut sw = SwendsenWang::new(&pb.sub, params, &SpinBoundary::all_plus(&pb.sub))?;
            let mut sigma = SpinConfig::all_plus(pb.sub.vertex_count());
            for _ in 0..budget.burn_in {
                sw.step(&mut sigma, &mut ball_rng);
            }
            Some((pb, sw, sigma, v))
        }
        None => None,
    };
    let mut out = PolymerTailResult {
        hat: PolymerTail::default(),
        tilde: ball.as_ref().map(|_| PolymerTail::default()),
    };
    let mut rng = rng_from_seed(derive_seed(seed, "polymer/reference"));
    sample_phase_reference(g, params, budget, &mut rng, |s| {
        match sites {
            SiteChoice::All => (0..n).for_each(|w| out.hat.record(g, s, w)),
            SiteChoice::Fixed(ws) => ws.iter().for_each(|&w| out.hat.record(g, s, w)),
            SiteChoice::RandomPerSample => out.hat.record(g, s, pick.gen_range(0..n)),
        }
        if let Some((pb, sw, sigma, v)) = ball.as_mut() {
            for _ in 0..budget.thin.max(1) {
                sw.step(sigma, &mut ball_rng);
            }
            let plus = pb.extend(n, sigma);
            let m = plus.meet(s);
            assert!(plus.dominates(&m) && s.dominates(&m), "meet is below both arguments");
            out.tilde.as_mut().unwrap().record(g, &m, *v);
        }
    })?;
    Ok(out)
}

/// `max{m ≤ n : m·f(m) ≤ min(t, e^{n^{d-1}/K})}`, or 0 when no `m ≥ 1`
/// qualifies. `f[i]` holds `f(i + 1)`.
pub fn g_of_t(f: &[f64], n: usize, d: usize, k: f64, t: f64) -> usize {
    let cap = ((n as f64).powi(d as i32 - 1) / k).exp();
    let budget = t.min(cap);
    (1..=n.min(f.len())).rev().find(|&m| m as f64 * f[m - 1] <= budget).unwrap_or(0)
}

/// Nondecreasing tabulation of `f` on `1..=n` from measured `(m, time)`
/// points: linear interpolation between points, constant extrapolation,
/// then a running maximum.
pub fn tabulate_local_mixing(points: &[(usize, f64)], n: usize) -> Result<Vec<f64>> {
    if points.is_empty() || points.iter().any(|p| p.0 == 0 || !(p.1 > 0.0)) {
        return Err(Error::InvalidParameter("need positive measurements at positive scales".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by_key(|p| p.0);
    let mut out = Vec::with_capacity(n);
    let mut best = 0.0f64;
    for m in 1..=n {
        let v = match pts.iter().position(|p| p.0 >= m) {
            Some(0) => pts[0].1,
            Some(i) => {
                let (a, b) = (pts[i - 1], pts[i]);
                a.1 + (b.1 - a.1) * (m - a.0) as f64 / (b.0 - a.0) as f64
            }
            None => pts.last().unwrap().1,
        };
        best = best.max(v);
        out.push(best);
    }
    Ok(out)
}
