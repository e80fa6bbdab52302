//! Brute-force ground truth on tiny instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Graph;
use crate::glauber::ChainMode;
use crate::ising::{gibbs_log_weight, heat_bath_prob_plus, ModelParams, SpinBoundary, SpinConfig};
use crate::random_cluster::{
    label_components, rc_log_weight, BondConfig, ColoringMode, ExtendedGraph, RcBoundaryPartition, RcParams,
};

pub const ENUMERATION_CAP: usize = 20;
pub const KERNEL_CAP: usize = 14;
pub const TOLERANCE: f64 = 1e-12;

/// A probability vector over an enumerated state space. Spin states are
/// indexed by [`SpinConfig::code`], bond states by [`BondConfig::code`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactLaw {
    pub probs: Vec<f64>,
}

impl ExactLaw {
    pub fn from_log_weights(logs: Vec<f64>) -> Self {
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.into_iter().map(|l| (l - max).exp()).collect();
        Self::from_weights(w)
    }

    pub fn from_weights(w: Vec<f64>) -> Self {
        let z: f64 = w.iter().sum();
        Self { probs: w.into_iter().map(|x| x / z).collect() }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn tv(&self, other: &ExactLaw) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::SupportMismatch { left: self.len(), right: other.len() });
        }
        Ok(0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Restriction to `keep`, renormalized.
    pub fn conditioned(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self::from_weights(self.probs.iter().enumerate().map(|(i, &p)| if keep(i) { p } else { 0.0 }).collect())
    }

    pub fn mass(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.probs.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, p)| p).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsLaws {
    pub full: ExactLaw,
    /// Conditioned on `M ≥ 0`.
    pub plus: ExactLaw,
    /// Conditioned on `M ≤ 0`.
    pub minus: ExactLaw,
}

fn magnetization_of(n: usize, code: usize) -> i64 {
    2 * code.count_ones() as i64 - n as i64
}

pub fn enumerate_gibbs(g: &Graph, params: &ModelParams, bc: &SpinBoundary) -> Result<GibbsLaws> {
    let n = g.vertex_count();
    if n > ENUMERATION_CAP {
        return Err(Error::SizeCap { what: "spins", size: n, cap: ENUMERATION_CAP });
    }
    bc.check(g)?;
    let logs = (0..1usize << n).map(|c| gibbs_log_weight(g, &SpinConfig::from_code(n, c), params, bc)).collect();
    let full = ExactLaw::from_log_weights(logs);
    let plus = full.conditioned(|c| magnetization_of(n, c) >= 0);
    let minus = full.conditioned(|c| magnetization_of(n, c) <= 0);
    Ok(GibbsLaws { full, plus, minus })
}

pub fn enumerate_rc(g: &Graph, rc: &RcParams, xi: &RcBoundaryPartition) -> Result<ExactLaw> {
    let m = g.edge_count();
    if m > ENUMERATION_CAP {
        return Err(Error::SizeCap { what: "edges", size: m, cap: ENUMERATION_CAP });
    }
    if rc.p <= 0.0 || rc.p >= 1.0 {
        return Err(Error::InvalidParameter(format!("enumerate_rc needs p in (0,1), got {}", rc.p)));
    }
    let logs = (0..1usize << m)
        .map(|c| rc_log_weight(g, &BondConfig::from_code(m, c), rc, xi))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ExactLaw::from_log_weights(logs))
}

/// Probability that a single event at `v` leaves `+1` there, for the given
/// chain mode.
fn kernel_plus(g: &Graph, params: &ModelParams, bc: &SpinBoundary, mode: ChainMode, code: usize, v: usize) -> f64 {
    let n = g.vertex_count();
    let sigma = SpinConfig::from_code(n, code);
    let p = heat_bath_prob_plus(g, v, &sigma, params, bc);
    let m_rest = sigma.magnetization() - sigma.get(v) as i64;
    match mode {
        ChainMode::Plain => p,
        ChainMode::RestrictedPlus if m_rest - 1 < 0 => 1.0,
        ChainMode::RestrictedMinus if m_rest + 1 > 0 => 0.0,
        _ => p,
    }
}

/// `max |π(x)P(x,y) − π(y)P(y,x)|` for the single-event kernel (uniform
/// vertex, then the threshold rule).
pub fn check_detailed_balance(
    g: &Graph,
    params: &ModelParams,
    bc: &SpinBoundary,
    mode: ChainMode,
    law: &ExactLaw,
) -> Result<f64> {
    let n = g.vertex_count();
    if n > KERNEL_CAP {
        return Err(Error::SizeCap { what: "kernel states (log2)", size: n, cap: KERNEL_CAP });
    }
    if law.len() != 1 << n {
        return Err(Error::SupportMismatch { left: law.len(), right: 1 << n });
    }
    let mut worst: f64 = 0.0;
    for x in 0..1usize << n {
        for v in 0..n {
            let y = x ^ (1 << v);
            if y < x {
                continue;
            }
            let to = |from: usize, target_plus: bool| {
                let pp = kernel_plus(g, params, bc, mode, from, v);
                (if target_plus { pp } else { 1.0 - pp }) / n as f64
            };
            let x_to_y = to(x, y >> v & 1 == 1);
            let y_to_x = to(y, x >> v & 1 == 1);
            worst = worst.max((law.probs[x] * x_to_y - law.probs[y] * y_to_x).abs());
        }
    }
    Ok(worst)
}

/// Spin law on the free vertices of `g` produced by sampling the random
/// cluster measure and coloring with `mode`. Free-uniform ignores the bc;
/// plus-boundary wires the frozen shell and colors its cluster `+1`.
pub fn es_spin_law(g: &Graph, params: &ModelParams, mode: ColoringMode) -> Result<ExactLaw> {
    let n = g.vertex_count();
    if n > ENUMERATION_CAP {
        return Err(Error::SizeCap { what: "spins", size: n, cap: ENUMERATION_CAP });
    }
    let rc = RcParams::ising(params);
    let (graph, xi) = match mode {
        ColoringMode::PlusBoundary => {
            let ext = ExtendedGraph::new(g);
            if !ext.has_frozen() {
                return Err(Error::MissingBoundaryBlock);
            }
            let xi = ext.wired();
            (ext.graph, xi)
        }
        _ => (g.clone(), RcBoundaryPartition::none()),
    };
    let rc_law = enumerate_rc(&graph, &rc, &xi)?;
    let m = graph.edge_count();
    let mut out = vec![0.0; 1 << n];
    for (code, &w) in rc_law.probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let omega = BondConfig::from_code(m, code);
        let lab = label_components(&graph, &omega, &xi);
        let c = lab.count();
        let forced: Vec<bool> = match mode {
            ColoringMode::PlusBoundary => lab.touches_boundary.clone(),
            ColoringMode::LargestPlus => {
                let big = lab.largest();
                (0..c).map(|i| Some(i as u32) == big).collect()
            }
            _ => vec![false; c],
        };
        let colorings: Vec<usize> = (0..1usize << c)
            .filter(|&col| (0..c).all(|i| !forced[i] || col >> i & 1 == 1))
            .filter_map(|col| {
                let code: usize =
                    (0..n).filter(|&v| col >> lab.labels[v] & 1 == 1).fold(0, |acc, v| acc | 1 << v);
                if mode == ColoringMode::ConditionalPositive && magnetization_of(n, code) < 0 {
                    None
                } else {
                    Some(code)
                }
            })
            .collect();
        let share = w / colorings.len() as f64;
        for code in colorings {
            out[code] += share;
        }
    }
    Ok(ExactLaw::from_weights(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsIdentity {
    /// TV between the ES law and its Ising target.
    pub tv: f64,
    /// For largest-plus: TV between the largest-plus law and the
    /// conditional-positive ES law, plus that law's own defect.
    pub bound: Option<f64>,
}

/// Compares the ES construction with its Ising target: `π` for free mode,
/// `π` with the graph's plus shell for plus-boundary mode, `π(·|M ≥ 0)` for
/// the largest-plus and conditional-positive modes.
pub fn check_es_identity(g: &Graph, params: &ModelParams, mode: ColoringMode) -> Result<EsIdentity> {
    let es = es_spin_law(g, params, mode)?;
    match mode {
        ColoringMode::FreeUniform => {
            let exact = enumerate_gibbs(g, params, &SpinBoundary::none())?;
            Ok(EsIdentity { tv: es.tv(&exact.full)?, bound: None })
        }
        ColoringMode::PlusBoundary => {
            let exact = enumerate_gibbs(g, params, &SpinBoundary::all_plus(g))?;
            Ok(EsIdentity { tv: es.tv(&exact.full)?, bound: None })
        }
        ColoringMode::ConditionalPositive => {
            let exact = enumerate_gibbs(g, params, &SpinBoundary::none())?;
            Ok(EsIdentity { tv: es.tv(&exact.plus)?, bound: None })
        }
        ColoringMode::LargestPlus => {
            let exact = enumerate_gibbs(g, params, &SpinBoundary::none())?;
            let hat = es_spin_law(g, params, ColoringMode::ConditionalPositive)?;
            let bound = es.tv(&hat)? + hat.tv(&exact.plus)?;
            Ok(EsIdentity { tv: es.tv(&exact.plus)?, bound: Some(bound) })
        }
    }
}

/// `max_y |(πP)(y) − π(y)|` for the exact Swendsen–Wang kernel.
pub fn check_sw_stationarity(g: &Graph, params: &ModelParams, bc: &SpinBoundary) -> Result<f64> {
    let n = g.vertex_count();
    if n > 12 {
        return Err(Error::SizeCap { what: "spins", size: n, cap: 12 });
    }
    let pi = enumerate_gibbs(g, params, bc)?.full;
    let ext = ExtendedGraph::new(g);
    let bc_vals: Vec<i8> = if bc.values().is_empty() { vec![1; g.frozen.count] } else { bc.values().to_vec() };
    let spin = |code: usize, v: usize| -> i8 {
        if v < n {
            if code >> v & 1 == 1 { 1 } else { -1 }
        } else {
            bc_vals[v - n]
        }
    };
    let mut next = vec![0.0; 1 << n];
    for x in 0..1usize << n {
        let agreeing: Vec<usize> = ext
            .graph
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, ed)| spin(x, ed[0] as usize) == spin(x, ed[1] as usize))
            .map(|(e, _)| e)
            .collect();
        if agreeing.len() > ENUMERATION_CAP {
            return Err(Error::SizeCap { what: "agreeing edges", size: agreeing.len(), cap: ENUMERATION_CAP });
        }
        for sub in 0..1usize << agreeing.len() {
            let k = sub.count_ones() as i32;
            let w = params.p.powi(k) * (1.0 - params.p).powi(agreeing.len() as i32 - k);
            if w == 0.0 {
                continue;
            }
            let mut omega = BondConfig::empty(ext.graph.edge_count());
            for (i, &e) in agreeing.iter().enumerate() {
                if sub >> i & 1 == 1 {
                    omega.set(e, true);
                }
            }
            let lab = label_components(&ext.graph, &omega, &RcBoundaryPartition::none());
            let mut fixed = vec![0i8; lab.count()];
            for v in n..ext.graph.vertex_count() {
                fixed[lab.labels[v] as usize] = bc_vals[v - n];
            }
            let free: Vec<usize> = (0..lab.count()).filter(|&c| fixed[c] == 0).collect();
            let share = pi.probs[x] * w / (1u64 << free.len()) as f64;
            for col in 0..1usize << free.len() {
                let mut color = fixed.clone();
                for (i, &c) in free.iter().enumerate() {
                    color[c] = if col >> i & 1 == 1 { 1 } else { -1 };
                }
                let y = (0..n).filter(|&v| color[lab.labels[v] as usize] == 1).fold(0, |acc, v| acc | 1 << v);
                next[y] += share;
            }
        }
    }
    Ok(next.iter().zip(&pi.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Named instances used by the oracle suites.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub name: &'static str,
    pub graph: Graph,
    pub bc: SpinBoundary,
}

/// A 2×2 square whose eight outside neighbours form a frozen shell.
pub fn square_with_shell() -> Graph {
    let edges = vec![[0, 1], [2, 3], [0, 2], [1, 3]];
    let links = vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]];
    Graph::general_with_frozen(4, edges, 8, links).expect("valid square")
}

pub fn oracle_suite() -> Vec<OracleInstance> {
    let path = Graph::general(5, (0..4).map(|i| [i, i + 1]).collect()).unwrap();
    let cycle = Graph::general(5, (0..5).map(|i| [i, (i + 1) % 5]).collect()).unwrap();
    let k4 = Graph::general(4, vec![[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]).unwrap();
    let square = square_with_shell();
    let plus = SpinBoundary::all_plus(&square);
    vec![
        OracleInstance { name: "path5", graph: path, bc: SpinBoundary::none() },
        OracleInstance { name: "cycle5", graph: cycle, bc: SpinBoundary::none() },
        OracleInstance { name: "k4", graph: k4, bc: SpinBoundary::none() },
        OracleInstance { name: "square2x2-plus", graph: square, bc: plus },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instance: String,
    pub check: String,
    pub beta: f64,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(instance: &str, check: &str, beta: f64, max_violation: f64, tolerance: f64) -> Self {
        Self {
            instance: instance.into(),
            check: check.into(),
            beta,
            max_violation,
            tolerance,
            pass: max_violation <= tolerance,
        }
    }
}

/// Detailed balance of the plain kernel against `π` and of the restricted
/// kernel against `π(·|M ≥ 0)`.
pub fn detailed_balance_suite(betas: &[f64]) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    for inst in oracle_suite() {
        for &b in betas {
            let params = ModelParams::new(b)?;
            let laws = enumerate_gibbs(&inst.graph, &params, &inst.bc)?;
            let plain = check_detailed_balance(&inst.graph, &params, &inst.bc, ChainMode::Plain, &laws.full)?;
            out.push(OracleReport::new(inst.name, "detailed-balance-plain", b, plain, TOLERANCE));
            let restricted =
                check_detailed_balance(&inst.graph, &params, &inst.bc, ChainMode::RestrictedPlus, &laws.plus)?;
            out.push(OracleReport::new(inst.name, "detailed-balance-restricted", b, restricted, TOLERANCE));
        }
    }
    Ok(out)
}

/// Free and plus-boundary ES identities, and the largest-plus gap against
/// its bound.
pub fn es_identity_suite(betas: &[f64]) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    for inst in oracle_suite() {
        for &b in betas {
            let params = ModelParams::new(b)?;
            if inst.bc.values().is_empty() {
                let free = check_es_identity(&inst.graph, &params, ColoringMode::FreeUniform)?;
                out.push(OracleReport::new(inst.name, "es-free", b, free.tv, TOLERANCE));
                let lp = check_es_identity(&inst.graph, &params, ColoringMode::LargestPlus)?;
                let bound = lp.bound.unwrap_or(0.0);
                out.push(OracleReport::new(inst.name, "es-largest-plus-gap-minus-bound", b, lp.tv - bound, TOLERANCE));
            } else {
                let plus = check_es_identity(&inst.graph, &params, ColoringMode::PlusBoundary)?;
                out.push(OracleReport::new(inst.name, "es-plus-boundary", b, plus.tv, TOLERANCE));
                // the same free-spin graph without its shell
                let bare = Graph::general(inst.graph.vertex_count(), inst.graph.edges().to_vec())?;
                let free = check_es_identity(&bare, &params, ColoringMode::FreeUniform)?;
                out.push(OracleReport::new(inst.name, "es-free", b, free.tv, TOLERANCE));
            }
        }
    }
    Ok(out)
}
