//! Spin configurations, Gibbs weights and the heat-bath conditional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Graph;

/// Random-cluster `q` paired with the Ising model.
pub const Q: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    /// `1 - e^{-β}`.
    pub p: f64,
}

impl ModelParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(Self { beta, p: -(-beta).exp_m1() })
    }

    /// Parameters from the bond probability, `β = -ln(1 - p)`.
    pub fn from_p(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p must be in [0,1), got {p}")));
        }
        Ok(Self { beta: -(-p).ln_1p(), p })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    spins: Vec<i8>,
    magnetization: i64,
}

impl SpinConfig {
    pub fn from_spins(spins: Vec<i8>) -> Result<Self> {
        if let Some(s) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter(format!("spin value {s}")));
        }
        let magnetization = spins.iter().map(|&s| s as i64).sum();
        Ok(Self { spins, magnetization })
    }

    pub fn constant(n: usize, s: i8) -> Self {
        Self { spins: vec![s; n], magnetization: n as i64 * s as i64 }
    }

    pub fn all_plus(n: usize) -> Self {
        Self::constant(n, 1)
    }

    pub fn all_minus(n: usize) -> Self {
        Self::constant(n, -1)
    }

    /// Configuration whose bit `i` of `code` set means vertex `i` is `+1`.
    pub fn from_code(n: usize, code: usize) -> Self {
        let spins: Vec<i8> = (0..n).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect();
        let magnetization = spins.iter().map(|&s| s as i64).sum();
        Self { spins, magnetization }
    }

    pub fn code(&self) -> usize {
        self.spins.iter().enumerate().fold(0, |c, (i, &s)| if s == 1 { c | 1 << i } else { c })
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn get(&self, v: usize) -> i8 {
        self.spins[v]
    }

    #[inline]
    pub fn set(&mut self, v: usize, s: i8) {
        let old = self.spins[v];
        if old != s {
            self.spins[v] = s;
            self.magnetization += 2 * s as i64;
        }
    }

    pub fn magnetization(&self) -> i64 {
        self.magnetization
    }

    pub fn recomputed_magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }

    pub fn flipped(&self) -> Self {
        Self { spins: self.spins.iter().map(|&s| -s).collect(), magnetization: -self.magnetization }
    }

    /// Pointwise `self ≥ other`.
    pub fn dominates(&self, other: &SpinConfig) -> bool {
        self.spins.iter().zip(&other.spins).all(|(a, b)| a >= b)
    }

    /// Pointwise minimum.
    pub fn meet(&self, other: &SpinConfig) -> SpinConfig {
        let spins: Vec<i8> = self.spins.iter().zip(&other.spins).map(|(&a, &b)| a.min(b)).collect();
        let magnetization = spins.iter().map(|&s| s as i64).sum();
        SpinConfig { spins, magnetization }
    }

    /// `N M` header line followed by one `+`/`-` character per vertex.
    pub fn to_text(&self) -> String {
        let body: String = self.spins.iter().map(|&s| if s == 1 { '+' } else { '-' }).collect();
        format!("{} {}\n{}\n", self.len(), self.magnetization, body)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty spin file".into()))?;
        let h: Vec<i64> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if h.len() != 2 {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let body = lines.next().unwrap_or("");
        let spins = body
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                _ => Err(Error::Parse(format!("bad spin character {c:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        let cfg = SpinConfig::from_spins(spins)?;
        if cfg.len() as i64 != h[0] || cfg.magnetization != h[1] {
            return Err(Error::Parse("header does not match spins".into()));
        }
        Ok(cfg)
    }
}

/// Frozen spins on a graph's frozen shell.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpinBoundary {
    values: Vec<i8>,
}

impl SpinBoundary {
    pub fn none() -> Self {
        Self { values: Vec::new() }
    }

    pub fn constant(g: &Graph, s: i8) -> Self {
        Self { values: vec![s; g.frozen.count] }
    }

    pub fn all_plus(g: &Graph) -> Self {
        Self::constant(g, 1)
    }

    pub fn all_minus(g: &Graph) -> Self {
        Self::constant(g, -1)
    }

    pub fn from_values(g: &Graph, values: Vec<i8>) -> Result<Self> {
        if values.len() != g.frozen.count {
            return Err(Error::BoundaryMismatch { expected: g.frozen.count, got: values.len() });
        }
        if values.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("boundary spins must be ±1".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn flipped(&self) -> Self {
        Self { values: self.values.iter().map(|&s| -s).collect() }
    }

    pub fn check(&self, g: &Graph) -> Result<()> {
        let ok = self.values.len() == g.frozen.count
            || (self.values.is_empty() && g.frozen.link_count() == 0);
        if ok {
            Ok(())
        } else {
            Err(Error::BoundaryMismatch { expected: g.frozen.count, got: self.values.len() })
        }
    }

    /// Sum of frozen neighbor spins of `v`.
    pub fn field_at(&self, g: &Graph, v: usize) -> i32 {
        if self.values.is_empty() {
            return 0;
        }
        g.frozen.links_of(v).iter().map(|&f| self.values[f as usize] as i32).sum()
    }
}

/// Membership of a configuration in the phase sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMembership {
    /// `M ≥ 0`
    pub plus: bool,
    /// `M ≤ 0`
    pub minus: bool,
    /// `0 ≤ M ≤ 1`
    pub plus_boundary: bool,
    /// `-1 ≤ M ≤ 0`
    pub minus_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseTag {
    Plus,
    Minus,
    PlusBoundary,
    MinusBoundary,
}

impl PhaseTag {
    pub fn contains(self, magnetization: i64) -> bool {
        match self {
            PhaseTag::Plus => magnetization >= 0,
            PhaseTag::Minus => magnetization <= 0,
            PhaseTag::PlusBoundary => (0..=1).contains(&magnetization),
            PhaseTag::MinusBoundary => (-1..=0).contains(&magnetization),
        }
    }
}

pub fn classify_phase(sigma: &SpinConfig) -> PhaseMembership {
    let m = sigma.magnetization();
    PhaseMembership {
        plus: PhaseTag::Plus.contains(m),
        minus: PhaseTag::Minus.contains(m),
        plus_boundary: PhaseTag::PlusBoundary.contains(m),
        minus_boundary: PhaseTag::MinusBoundary.contains(m),
    }
}

/// Number of disagreeing edges, including free–frozen links when `bc` is set.
pub fn cut_size(g: &Graph, sigma: &SpinConfig, bc: &SpinBoundary) -> usize {
    let s = sigma.spins();
    let mut cut = g.edges().iter().filter(|e| s[e[0] as usize] != s[e[1] as usize]).count();
    if !bc.values.is_empty() {
        for (v, f) in g.frozen.link_pairs() {
            if s[v as usize] != bc.values[f as usize] {
                cut += 1;
            }
        }
    }
    cut
}

/// Unnormalized log Gibbs weight `-β·cut`.
pub fn gibbs_log_weight(g: &Graph, sigma: &SpinConfig, params: &ModelParams, bc: &SpinBoundary) -> f64 {
    -params.beta * cut_size(g, sigma, bc) as f64
}

/// Change in cut size if `v` is flipped.
pub fn flip_cut_delta(g: &Graph, sigma: &SpinConfig, bc: &SpinBoundary, v: usize) -> i64 {
    // agreeing neighbors become disagreeing and vice versa
    local_field(g, sigma, bc, v) as i64 * sigma.get(v) as i64
}

/// `k₊ - k₋` over free and frozen neighbors.
pub fn local_field(g: &Graph, sigma: &SpinConfig, bc: &SpinBoundary, v: usize) -> i32 {
    let s = sigma.spins();
    g.neighbors(v).iter().map(|&u| s[u as usize] as i32).sum::<i32>() + bc.field_at(g, v)
}

pub fn prob_plus_from_field(beta: f64, field: i32) -> f64 {
    1.0 / (1.0 + (-beta * field as f64).exp())
}

/// `π(σ_v = +1 | rest) = 1 / (1 + e^{-β(k₊ - k₋)})`.
pub fn heat_bath_prob_plus(
    g: &Graph,
    v: usize,
    sigma: &SpinConfig,
    params: &ModelParams,
    bc: &SpinBoundary,
) -> f64 {
    prob_plus_from_field(params.beta, local_field(g, sigma, bc, v))
}

pub fn heat_bath_prob_minus(
    g: &Graph,
    v: usize,
    sigma: &SpinConfig,
    params: &ModelParams,
    bc: &SpinBoundary,
) -> f64 {
    prob_plus_from_field(params.beta, -local_field(g, sigma, bc, v))
}

/// Precomputed heat-bath context for hot loops.
#[derive(Debug, Clone)]
pub struct IsingSystem<'g> {
    pub graph: &'g Graph,
    pub params: ModelParams,
    pub bc: SpinBoundary,
    frozen_field: Vec<i32>,
    table: Vec<f64>,
    offset: i32,
}

impl<'g> IsingSystem<'g> {
    pub fn new(graph: &'g Graph, params: ModelParams, bc: SpinBoundary) -> Result<Self> {
        bc.check(graph)?;
        let frozen_field: Vec<i32> = (0..graph.vertex_count()).map(|v| bc.field_at(graph, v)).collect();
        let max = (0..graph.vertex_count()).map(|v| graph.full_degree(v)).max().unwrap_or(0) as i32;
        let table = (-max..=max).map(|f| prob_plus_from_field(params.beta, f)).collect();
        Ok(Self { graph, params, bc, frozen_field, table, offset: max })
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    #[inline]
    pub fn field(&self, spins: &[i8], v: usize) -> i32 {
        let mut f = self.frozen_field[v];
        for &u in self.graph.neighbors(v) {
            f += spins[u as usize] as i32;
        }
        f
    }

    #[inline]
    pub fn prob_plus(&self, spins: &[i8], v: usize) -> f64 {
        self.table[(self.field(spins, v) + self.offset) as usize]
    }

    pub fn cut_size(&self, sigma: &SpinConfig) -> usize {
        cut_size(self.graph, sigma, &self.bc)
    }

    pub fn same_model(&self, other: &IsingSystem<'_>) -> bool {
        std::ptr::eq(self.graph, other.graph) && self.params == other.params && self.bc == other.bc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_box, build_torus};
    use proptest::prelude::*;

    fn triangle() -> Graph {
        Graph::general(3, vec![[0, 1], [1, 2], [0, 2]]).unwrap()
    }

    #[test]
    fn params_from_beta() {
        let p = ModelParams::new(1.0).unwrap();
        assert!((p.p - (1.0 - (-1.0f64).exp())).abs() < 1e-16);
        assert!(ModelParams::new(-1.0).is_err());
        let q = ModelParams::from_p(p.p).unwrap();
        assert!((q.beta - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cut_examples() {
        let g = build_box(2, 2).unwrap();
        let plus = SpinConfig::all_plus(g.vertex_count());
        assert_eq!(cut_size(&g, &plus, &SpinBoundary::all_plus(&g)), 0);
        let t = build_torus(2, 5).unwrap();
        let mut s = SpinConfig::all_plus(25);
        s.set(7, -1);
        assert_eq!(cut_size(&t, &s, &SpinBoundary::none()), 4);
        let tri = SpinConfig::from_spins(vec![1, 1, -1]).unwrap();
        assert_eq!(cut_size(&triangle(), &tri, &SpinBoundary::none()), 2);
        let b1 = ModelParams::new(1.0).unwrap();
        assert_eq!(gibbs_log_weight(&triangle(), &tri, &b1, &SpinBoundary::none()), -2.0);
        let b0 = ModelParams::new(0.0).unwrap();
        assert_eq!(gibbs_log_weight(&triangle(), &tri, &b0, &SpinBoundary::none()), 0.0);
    }

    #[test]
    fn heat_bath_examples() {
        let g = Graph::general(3, vec![[0, 1], [0, 2]]).unwrap();
        let s = SpinConfig::from_spins(vec![-1, 1, 1]).unwrap();
        let none = SpinBoundary::none();
        let b0 = ModelParams::new(0.0).unwrap();
        assert_eq!(heat_bath_prob_plus(&g, 0, &s, &b0, &none), 0.5);
        // enumerate the two weights e^0 (σ=+) and e^{-2β} (σ=-) at β = ln 2
        let b = ModelParams::new(2f64.ln()).unwrap();
        let w_plus = 1.0;
        let w_minus = (-2.0 * b.beta).exp();
        let oracle = w_plus / (w_plus + w_minus);
        assert!((oracle - 0.8).abs() < 1e-15);
        assert!((heat_bath_prob_plus(&g, 0, &s, &b, &none) - 0.8).abs() < 1e-15);
        let mixed = SpinConfig::from_spins(vec![1, 1, -1]).unwrap();
        assert_eq!(heat_bath_prob_plus(&g, 0, &mixed, &b, &none), 0.5);
    }

    #[test]
    fn boundary_enters_heat_bath() {
        let g = build_box(2, 0).unwrap();
        let s = SpinConfig::all_minus(1);
        let b = ModelParams::new(1.0).unwrap();
        let p = heat_bath_prob_plus(&g, 0, &s, &b, &SpinBoundary::all_plus(&g));
        assert!((p - 1.0 / (1.0 + (-4.0f64).exp())).abs() < 1e-15);
        assert!(matches!(
            SpinBoundary::from_values(&g, vec![1; 3]),
            Err(Error::BoundaryMismatch { expected: 8, got: 3 })
        ));
    }

    #[test]
    fn phase_examples() {
        let m = classify_phase(&SpinConfig::all_plus(4));
        assert!(m.plus && !m.minus && !m.plus_boundary);
        let z = classify_phase(&SpinConfig::from_spins(vec![1, -1, 1, -1]).unwrap());
        assert!(z.plus && z.minus && z.plus_boundary);
        let one = classify_phase(&SpinConfig::from_spins(vec![1, -1, 1]).unwrap());
        assert!(one.plus && one.plus_boundary && !one.minus);
    }

    #[test]
    fn text_roundtrip() {
        let s = SpinConfig::from_spins(vec![1, -1, -1, 1, 1]).unwrap();
        assert_eq!(SpinConfig::from_text(&s.to_text()).unwrap(), s);
        assert!(SpinConfig::from_text("3 1\n+-x\n").is_err());
    }

    proptest! {
        #[test]
        fn heat_bath_monotone_and_normalized(code in 0usize..(1 << 16), v in 0usize..16, beta in 0.0f64..3.0) {
            let g = build_torus(2, 4).unwrap();
            let params = ModelParams::new(beta).unwrap();
            let none = SpinBoundary::none();
            let s = SpinConfig::from_code(16, code);
            let p = heat_bath_prob_plus(&g, v, &s, &params, &none);
            let q = heat_bath_prob_minus(&g, v, &s, &params, &none);
            prop_assert!((p + q - 1.0).abs() < 1e-15);
            for &u in g.neighbors(v) {
                let mut up = s.clone();
                up.set(u as usize, 1);
                prop_assert!(heat_bath_prob_plus(&g, v, &up, &params, &none) >= p);
            }
        }

        #[test]
        fn flip_symmetry(code in 0usize..(1 << 9), bcode in 0usize..(1 << 12), beta in 0.0f64..3.0) {
            let g = build_box(2, 1).unwrap();
            let params = ModelParams::new(beta).unwrap();
            let bc = SpinBoundary::from_values(&g, (0..16).map(|i| if bcode >> (i % 12) & 1 == 1 { 1 } else { -1 }).collect()).unwrap();
            let s = SpinConfig::from_code(9, code);
            let a = gibbs_log_weight(&g, &s, &params, &bc);
            let b = gibbs_log_weight(&g, &s.flipped(), &params, &bc.flipped());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn incremental_cut_matches(seed in 0u64..1000) {
            use rand::Rng as _;
            let g = build_torus(2, 5).unwrap();
            let bc = SpinBoundary::none();
            let mut rng = crate::seed::rng_from_seed(seed);
            let mut s = SpinConfig::from_code(25, rng.gen::<usize>() & ((1 << 25) - 1));
            let mut cut = cut_size(&g, &s, &bc) as i64;
            for _ in 0..200 {
                let v = rng.gen_range(0..25);
                cut += flip_cut_delta(&g, &s, &bc, v);
                let nv = -s.get(v);
                s.set(v, nv);
                prop_assert_eq!(cut, cut_size(&g, &s, &bc) as i64);
                prop_assert_eq!(s.magnetization(), s.recomputed_magnetization());
            }
        }
    }
}
