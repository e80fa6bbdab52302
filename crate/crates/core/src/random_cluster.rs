//! The random-cluster model and its Edwards–Sokal couplings with Ising.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Graph;
use crate::glauber::EventStream;
use crate::ising::{ModelParams, SpinBoundary, SpinConfig, Q};
use crate::seed::Rng;
use crate::unionfind::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcParams {
    pub p: f64,
    pub q: f64,
}

impl RcParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(q > 0.0) {
            return Err(Error::InvalidParameter(format!("random-cluster p={p}, q={q}")));
        }
        Ok(Self { p, q })
    }

    pub fn ising(params: &ModelParams) -> Self {
        Self { p: params.p, q: Q }
    }

    /// Probability that an edge whose endpoints are not otherwise connected
    /// is open.
    pub fn isolated_open_prob(&self) -> f64 {
        self.p / (self.p + (1.0 - self.p) * self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BondConfig {
    open: Vec<bool>,
    n_open: usize,
}

impl BondConfig {
    pub fn empty(m: usize) -> Self {
        Self { open: vec![false; m], n_open: 0 }
    }

    pub fn full(m: usize) -> Self {
        Self { open: vec![true; m], n_open: m }
    }

    pub fn from_bits(open: Vec<bool>) -> Self {
        let n_open = open.iter().filter(|&&b| b).count();
        Self { open, n_open }
    }

    /// Bit `i` of `code` set means edge `i` is open.
    pub fn from_code(m: usize, code: usize) -> Self {
        Self::from_bits((0..m).map(|i| code >> i & 1 == 1).collect())
    }

    pub fn code(&self) -> usize {
        self.open.iter().enumerate().fold(0, |c, (i, &b)| if b { c | 1 << i } else { c })
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    #[inline]
    pub fn is_open(&self, e: usize) -> bool {
        self.open[e]
    }

    #[inline]
    pub fn set(&mut self, e: usize, value: bool) {
        if self.open[e] != value {
            self.open[e] = value;
            if value {
                self.n_open += 1;
            } else {
                self.n_open -= 1;
            }
        }
    }

    pub fn open_count(&self) -> usize {
        self.n_open
    }

    pub fn bits(&self) -> &[bool] {
        &self.open
    }

    /// Pointwise `self ≥ other`.
    pub fn dominates(&self, other: &BondConfig) -> bool {
        self.open.iter().zip(&other.open).all(|(&a, &b)| a || !b)
    }

    /// `|E| |ω|` header, then one `0`/`1` character per edge.
    pub fn to_text(&self) -> String {
        let body: String = self.open.iter().map(|&b| if b { '1' } else { '0' }).collect();
        format!("{} {}\n{}\n", self.len(), self.n_open, body)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty bond file".into()))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        let bits = lines
            .next()
            .unwrap_or("")
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("bad bond character {c:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        let b = BondConfig::from_bits(bits);
        if h.len() != 2 || h[0] != b.len() || h[1] != b.n_open {
            return Err(Error::Parse("header does not match bonds".into()));
        }
        Ok(b)
    }
}

/// Serialized as the `0`/`1` body string.
impl Serialize for BondConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.to_text().lines().nth(1).unwrap_or(""))
    }
}

impl<'de> Deserialize<'de> for BondConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let ones = s.chars().filter(|&c| c == '1').count();
        BondConfig::from_text(&format!("{} {}\n{}\n", s.len(), ones, s)).map_err(serde::de::Error::custom)
    }
}

/// A partition of boundary vertices; each block is wired by ghost edges.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RcBoundaryPartition {
    blocks: Vec<Vec<u32>>,
}

impl RcBoundaryPartition {
    /// No boundary at all (tori, general graphs).
    pub fn none() -> Self {
        Self { blocks: Vec::new() }
    }

    /// Single block containing the whole inner boundary.
    pub fn wired(g: &Graph) -> Self {
        Self::wired_on(g.inner_boundary())
    }

    pub fn wired_on(vertices: &[u32]) -> Self {
        if vertices.is_empty() {
            return Self::none();
        }
        let mut b = vertices.to_vec();
        b.sort_unstable();
        Self { blocks: vec![b] }
    }

    /// All singletons on the inner boundary.
    pub fn free(g: &Graph) -> Self {
        Self { blocks: g.inner_boundary().iter().map(|&v| vec![v]).collect() }
    }

    pub fn from_blocks(mut blocks: Vec<Vec<u32>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for b in &mut blocks {
            b.sort_unstable();
            for &v in b.iter() {
                if !seen.insert(v) {
                    return Err(Error::InvalidParameter(format!("vertex {v} in two blocks")));
                }
            }
        }
        blocks.retain(|b| !b.is_empty());
        blocks.sort();
        Ok(Self { blocks })
    }

    /// Partition of `boundary` by equal `labels[v]`.
    pub fn from_labels(boundary: &[u32], labels: &[u32]) -> Self {
        let mut map: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
        for &v in boundary {
            map.entry(labels[v as usize]).or_default().push(v);
        }
        let mut blocks: Vec<Vec<u32>> = map.into_values().collect();
        blocks.iter_mut().for_each(|b| b.sort_unstable());
        blocks.sort();
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<u32>] {
        &self.blocks
    }

    pub fn has_boundary(&self) -> bool {
        !self.blocks.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = u32> + '_ {
        self.blocks.iter().flatten().copied()
    }

    fn wire(&self, uf: &mut UnionFind) {
        for b in &self.blocks {
            for w in b.windows(2) {
                uf.union(w[0] as usize, w[1] as usize);
            }
        }
    }

    /// Block lists as text, one block per line.
    pub fn to_text(&self) -> String {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub labels: Vec<u32>,
    pub sizes: Vec<u32>,
    pub touches_boundary: Vec<bool>,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Largest cluster; ties go to the cluster with the smallest vertex
    /// index, which is the smallest label since labels follow first
    /// appearance.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<u32> = None;
        for (c, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|b| s > self.sizes[b as usize]) {
                best = Some(c as u32);
            }
        }
        best
    }
}

pub fn label_components(g: &Graph, omega: &BondConfig, xi: &RcBoundaryPartition) -> ComponentLabeling {
    let mut uf = UnionFind::new(g.vertex_count());
    for (e, edge) in g.edges().iter().enumerate() {
        if omega.is_open(e) {
            uf.union(edge[0] as usize, edge[1] as usize);
        }
    }
    xi.wire(&mut uf);
    let labels = uf.labels();
    let k = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut sizes = vec![0u32; k];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let mut touches_boundary = vec![false; k];
    for v in xi.vertices() {
        touches_boundary[labels[v as usize] as usize] = true;
    }
    ComponentLabeling { labels, sizes, touches_boundary }
}

/// Number of clusters with ghost wirings.
pub fn component_count(g: &Graph, omega: &BondConfig, xi: &RcBoundaryPartition) -> usize {
    let mut uf = UnionFind::new(g.vertex_count());
    for (e, edge) in g.edges().iter().enumerate() {
        if omega.is_open(e) {
            uf.union(edge[0] as usize, edge[1] as usize);
        }
    }
    xi.wire(&mut uf);
    uf.count()
}

/// `|ω| log p + (|E|-|ω|) log(1-p) + |Comp(ω;ξ)| log q`.
pub fn rc_log_weight(g: &Graph, omega: &BondConfig, rc: &RcParams, xi: &RcBoundaryPartition) -> Result<f64> {
    if !(rc.p > 0.0 && rc.p < 1.0) {
        return Err(Error::InvalidParameter(format!("rc_log_weight needs p in (0,1), got {}", rc.p)));
    }
    let open = omega.open_count() as f64;
    let closed = (g.edge_count() - omega.open_count()) as f64;
    let comps = component_count(g, omega, xi) as f64;
    Ok(open * rc.p.ln() + closed * (1.0 - rc.p).ln() + comps * rc.q.ln())
}

/// Reusable connectivity search over open edges plus ghost wirings.
#[derive(Debug, Clone)]
pub struct Connectivity {
    block_of: Vec<u32>,
    blocks: Vec<Vec<u32>>,
    stamp: Vec<u32>,
    block_stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<u32>,
}

impl Connectivity {
    pub fn new(g: &Graph, xi: &RcBoundaryPartition) -> Self {
        let mut block_of = vec![u32::MAX; g.vertex_count()];
        for (i, b) in xi.blocks().iter().enumerate() {
            for &v in b {
                block_of[v as usize] = i as u32;
            }
        }
        Self {
            block_of,
            blocks: xi.blocks().to_vec(),
            stamp: vec![0; g.vertex_count()],
            block_stamp: vec![0; xi.blocks().len()],
            epoch: 0,
            queue: Vec::new(),
        }
    }

    /// Whether `a` and `b` are joined in `ω` without edge `skip`.
    pub fn connected_without(
        &mut self,
        g: &Graph,
        omega: &BondConfig,
        a: usize,
        b: usize,
        skip: usize,
    ) -> bool {
        if a == b {
            return true;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.block_stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let ep = self.epoch;
        self.queue.clear();
        self.stamp[a] = ep;
        self.queue.push(a as u32);
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head] as usize;
            head += 1;
            let blk = self.block_of[u];
            if blk != u32::MAX && self.block_stamp[blk as usize] != ep {
                self.block_stamp[blk as usize] = ep;
                for &w in &self.blocks[blk as usize] {
                    if self.stamp[w as usize] != ep {
                        if w as usize == b {
                            return true;
                        }
                        self.stamp[w as usize] = ep;
                        self.queue.push(w);
                    }
                }
            }
            for (&w, &e) in g.neighbors(u).iter().zip(g.incident_edges(u)) {
                if e as usize == skip || !omega.is_open(e as usize) || self.stamp[w as usize] == ep {
                    continue;
                }
                if w as usize == b {
                    return true;
                }
                self.stamp[w as usize] = ep;
                self.queue.push(w);
            }
        }
        false
    }
}

/// Heat-bath probability that edge `e` is open given all other edges.
pub fn rc_edge_conditional(
    g: &Graph,
    e: usize,
    omega: &BondConfig,
    rc: &RcParams,
    xi: &RcBoundaryPartition,
) -> f64 {
    let mut conn = Connectivity::new(g, xi);
    edge_conditional_with(g, e, omega, rc, &mut conn)
}

pub fn edge_conditional_with(
    g: &Graph,
    e: usize,
    omega: &BondConfig,
    rc: &RcParams,
    conn: &mut Connectivity,
) -> f64 {
    let (a, b) = g.edge(e);
    if conn.connected_without(g, omega, a, b, e) {
        rc.p
    } else {
        rc.isolated_open_prob()
    }
}

/// Continuous-time single-bond heat bath: every edge carries a rate-1
/// clock; connectivity is recomputed exactly by search at each ring.
pub fn rc_glauber_run(
    g: &Graph,
    omega: &mut BondConfig,
    stream: &mut EventStream,
    t_max: f64,
    rc: &RcParams,
    xi: &RcBoundaryPartition,
) -> u64 {
    let mut conn = Connectivity::new(g, xi);
    let mut events = 0;
    while let Some(ev) = stream.next_before(t_max) {
        let e = ev.vertex as usize;
        let p = edge_conditional_with(g, e, omega, rc, &mut conn);
        omega.set(e, ev.threshold <= p);
        events += 1;
    }
    events
}

/// Free spins plus the frozen shell as ordinary vertices, with links as
/// edges. Used by Swendsen–Wang and the plus-boundary coloring.
#[derive(Debug, Clone)]
pub struct ExtendedGraph {
    pub graph: Graph,
    /// Number of free vertices; frozen vertices follow them.
    pub n_free: usize,
    /// Number of free edges; link edges follow them.
    pub m_free: usize,
}

impl ExtendedGraph {
    pub fn new(g: &Graph) -> Self {
        let n = g.vertex_count();
        let mut edges = g.edges().to_vec();
        let links = g.frozen.link_pairs();
        for &(v, f) in &links {
            edges.push([v, n as u32 + f]);
        }
        let mut graph = Graph::general(n + g.frozen.count, edges).expect("links are simple");
        graph.set_inner_boundary((n as u32..(n + g.frozen.count) as u32).collect());
        Self { graph, n_free: n, m_free: g.edge_count() }
    }

    pub fn has_frozen(&self) -> bool {
        self.graph.vertex_count() > self.n_free
    }

    /// Wired partition on the frozen vertices (the plus-boundary coupling).
    pub fn wired(&self) -> RcBoundaryPartition {
        RcBoundaryPartition::wired(&self.graph)
    }
}

/// Swendsen–Wang sampler context for a graph with an optional frozen shell.
#[derive(Debug, Clone)]
pub struct SwendsenWang {
    pub ext: ExtendedGraph,
    pub params: ModelParams,
    bc: Vec<i8>,
    uf: UnionFind,
    colors: Vec<i8>,
}

impl SwendsenWang {
    pub fn new(g: &Graph, params: ModelParams, bc: &SpinBoundary) -> Result<Self> {
        bc.check(g)?;
        let ext = ExtendedGraph::new(g);
        let bc_vals = if bc.values().is_empty() { vec![1; g.frozen.count] } else { bc.values().to_vec() };
        let n = ext.graph.vertex_count();
        Ok(Self { ext, params, bc: bc_vals, uf: UnionFind::new(n), colors: vec![0; n] })
    }

    /// One SW move; returns the intermediate bonds on the extended edge set.
    pub fn step(&mut self, sigma: &mut SpinConfig, rng: &mut Rng) -> BondConfig {
        let ext = &self.ext;
        let nf = ext.n_free;
        let spin_of = |v: usize, sigma: &SpinConfig, bc: &[i8]| -> i8 {
            if v < nf { sigma.get(v) } else { bc[v - nf] }
        };
        let mut omega = BondConfig::empty(ext.graph.edge_count());
        self.uf.reset();
        for (e, edge) in ext.graph.edges().iter().enumerate() {
            let (a, b) = (edge[0] as usize, edge[1] as usize);
            if spin_of(a, sigma, &self.bc) == spin_of(b, sigma, &self.bc) && rng.gen::<f64>() < self.params.p {
                omega.set(e, true);
                self.uf.union(a, b);
            }
        }
        self.colors.iter_mut().for_each(|c| *c = 0);
        for v in nf..ext.graph.vertex_count() {
            let r = self.uf.find(v);
            self.colors[r] = self.bc[v - nf];
        }
        for v in 0..nf {
            let r = self.uf.find(v);
            if self.colors[r] == 0 {
                self.colors[r] = if rng.gen::<bool>() { 1 } else { -1 };
            }
            sigma.set(v, self.colors[r]);
        }
        omega
    }

    /// Bonds restricted to the free edges.
    pub fn free_part(&self, omega: &BondConfig) -> BondConfig {
        BondConfig::from_bits(omega.bits()[..self.ext.m_free].to_vec())
    }
}

/// One SW move on `g` without a frozen shell.
pub fn swendsen_wang_step(
    g: &Graph,
    sigma: &SpinConfig,
    params: &ModelParams,
    bc: &SpinBoundary,
    rng: &mut Rng,
) -> Result<(BondConfig, SpinConfig)> {
    let mut sw = SwendsenWang::new(g, *params, bc)?;
    let mut out = sigma.clone();
    let omega = sw.step(&mut out, rng);
    Ok((omega, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColoringMode {
    FreeUniform,
    PlusBoundary,
    LargestPlus,
    ConditionalPositive,
}

fn color_clusters(lab: &ComponentLabeling, forced: &[bool], rng: &mut Rng) -> SpinConfig {
    let colors: Vec<i8> = (0..lab.count())
        .map(|c| {
            let coin = if rng.gen::<bool>() { 1 } else { -1 };
            if forced[c] { 1 } else { coin }
        })
        .collect();
    SpinConfig::from_spins(lab.labels.iter().map(|&l| colors[l as usize]).collect()).expect("±1")
}

/// Edwards–Sokal coloring of `ω`. For `ConditionalPositive`, see
/// [`es_color_conditional_positive`] for the attempt count.
pub fn es_color(
    g: &Graph,
    omega: &BondConfig,
    mode: ColoringMode,
    xi: &RcBoundaryPartition,
    rng: &mut Rng,
) -> Result<SpinConfig> {
    let lab = label_components(g, omega, xi);
    let mut forced = vec![false; lab.count()];
    match mode {
        ColoringMode::FreeUniform => {}
        ColoringMode::PlusBoundary => {
            if !xi.has_boundary() {
                return Err(Error::MissingBoundaryBlock);
            }
            forced.copy_from_slice(&lab.touches_boundary);
        }
        ColoringMode::LargestPlus => {
            if let Some(c) = lab.largest() {
                forced[c as usize] = true;
            }
        }
        ColoringMode::ConditionalPositive => {
            return Ok(conditional_positive(&lab, rng).0);
        }
    }
    Ok(color_clusters(&lab, &forced, rng))
}

fn conditional_positive(lab: &ComponentLabeling, rng: &mut Rng) -> (SpinConfig, u64) {
    let forced = vec![false; lab.count()];
    let mut attempts = 0;
    loop {
        attempts += 1;
        let s = color_clusters(lab, &forced, rng);
        if s.magnetization() >= 0 {
            return (s, attempts);
        }
    }
}

/// Fair coloring resampled until `M ≥ 0`; also returns the number of draws.
pub fn es_color_conditional_positive(
    g: &Graph,
    omega: &BondConfig,
    xi: &RcBoundaryPartition,
    rng: &mut Rng,
) -> (SpinConfig, u64) {
    conditional_positive(&label_components(g, omega, xi), rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcedCluster {
    None,
    /// Every cluster meeting a boundary block.
    Boundary,
    Largest,
}

/// One side of a shared-enumeration coloring.
#[derive(Debug, Clone, Copy)]
pub struct ColoringSide<'a> {
    pub graph: &'a Graph,
    pub omega: &'a BondConfig,
    pub xi: &'a RcBoundaryPartition,
    pub forced: ForcedCluster,
    /// Global identity of each local vertex.
    pub global_ids: &'a [u32],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedColoring {
    pub sigma: SpinConfig,
    pub sigma_prime: SpinConfig,
}

impl SharedColoring {
    /// Global ids in `region` where the two sides disagree. Region vertices
    /// absent from either side are skipped.
    pub fn disagreements(&self, a: &ColoringSide<'_>, b: &ColoringSide<'_>, region: &[u32]) -> Vec<u32> {
        let index = |side: &ColoringSide<'_>| {
            let mut m = std::collections::HashMap::new();
            for (i, &g) in side.global_ids.iter().enumerate() {
                m.insert(g, i);
            }
            m
        };
        let (ia, ib) = (index(a), index(b));
        region
            .iter()
            .copied()
            .filter(|g| match (ia.get(g), ib.get(g)) {
                (Some(&x), Some(&y)) => self.sigma.get(x) != self.sigma_prime.get(y),
                _ => false,
            })
            .collect()
    }
}

/// Colors both sides with one shared fair coin per global vertex: each
/// non-forced cluster takes the coin of its first vertex in `enumeration`;
/// forced clusters are `+1`.
pub fn shared_enumeration_color(
    a: &ColoringSide<'_>,
    b: &ColoringSide<'_>,
    enumeration: &[u32],
    rng: &mut Rng,
) -> Result<SharedColoring> {
    let size = enumeration.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut rank = vec![usize::MAX; size];
    let mut coin = vec![0i8; size];
    for (r, &g) in enumeration.iter().enumerate() {
        rank[g as usize] = r;
        coin[g as usize] = if rng.gen::<bool>() { 1 } else { -1 };
    }
    let color = |side: &ColoringSide<'_>| -> Result<SpinConfig> {
        if side.global_ids.len() != side.graph.vertex_count() {
            return Err(Error::InvalidParameter("global id map length".into()));
        }
        if side.forced == ForcedCluster::Boundary && !side.xi.has_boundary() {
            return Err(Error::MissingBoundaryBlock);
        }
        let lab = label_components(side.graph, side.omega, side.xi);
        let mut forced = vec![false; lab.count()];
        match side.forced {
            ForcedCluster::None => {}
            ForcedCluster::Boundary => forced.copy_from_slice(&lab.touches_boundary),
            ForcedCluster::Largest => {
                if let Some(c) = lab.largest() {
                    forced[c as usize] = true;
                }
            }
        }
        let mut leader = vec![(usize::MAX, u32::MAX); lab.count()];
        for (v, &l) in lab.labels.iter().enumerate() {
            let gid = side.global_ids[v];
            let r = *rank.get(gid as usize).unwrap_or(&usize::MAX);
            if r == usize::MAX {
                return Err(Error::InvalidParameter(format!("vertex {gid} missing from enumeration")));
            }
            if r < leader[l as usize].0 {
                leader[l as usize] = (r, gid);
            }
        }
        let spins = lab
            .labels
            .iter()
            .map(|&l| if forced[l as usize] { 1 } else { coin[leader[l as usize].1 as usize] })
            .collect();
        SpinConfig::from_spins(spins)
    };
    Ok(SharedColoring { sigma: color(a)?, sigma_prime: color(b)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_box, build_torus};
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;

    fn triangle() -> Graph {
        Graph::general(3, vec![[0, 1], [1, 2], [0, 2]]).unwrap()
    }

    fn rc2(p: f64) -> RcParams {
        RcParams::new(p, 2.0).unwrap()
    }

    #[test]
    fn log_weight_examples() {
        let g = build_torus(2, 3).unwrap();
        let m = g.edge_count();
        let p = 0.3;
        let w = rc_log_weight(&g, &BondConfig::empty(m), &rc2(p), &RcBoundaryPartition::none()).unwrap();
        assert!((w - (m as f64 * (0.7f64).ln() + 9.0 * 2f64.ln())).abs() < 1e-12);
        let w = rc_log_weight(&g, &BondConfig::full(m), &rc2(p), &RcBoundaryPartition::none()).unwrap();
        assert!((w - (m as f64 * p.ln() + 2f64.ln())).abs() < 1e-12);
        let t = triangle();
        let one = BondConfig::from_code(3, 0b001);
        let w = rc_log_weight(&t, &one, &rc2(0.5), &RcBoundaryPartition::none()).unwrap();
        assert!((w - ((1.0f64 / 8.0).ln() + 2.0 * 2f64.ln())).abs() < 1e-12);
        assert!(rc_log_weight(&t, &one, &rc2(1.0), &RcBoundaryPartition::none()).is_err());
    }

    #[test]
    fn labeling_examples() {
        let g = build_box(2, 2).unwrap();
        let lab = label_components(&g, &BondConfig::empty(g.edge_count()), &RcBoundaryPartition::wired(&g));
        assert_eq!(lab.count(), 1 + 9);
        assert_eq!(lab.sizes[lab.labels[g.inner_boundary()[0] as usize] as usize], 16);
        let full = label_components(&g, &BondConfig::full(g.edge_count()), &RcBoundaryPartition::free(&g));
        assert_eq!(full.sizes, vec![25]);
        let path = Graph::general(3, vec![[0, 1], [1, 2]]).unwrap();
        let lab = label_components(&path, &BondConfig::from_code(2, 0b01), &RcBoundaryPartition::none());
        assert_eq!(lab.labels, vec![0, 0, 1]);
    }

    fn enumerated_edge_conditional(g: &Graph, e: usize, others: &BondConfig, rc: &RcParams) -> f64 {
        let mut open = others.clone();
        open.set(e, true);
        let mut closed = others.clone();
        closed.set(e, false);
        let none = RcBoundaryPartition::none();
        let wo = rc_log_weight(g, &open, rc, &none).unwrap().exp();
        let wc = rc_log_weight(g, &closed, rc, &none).unwrap().exp();
        wo / (wo + wc)
    }

    #[test]
    fn edge_conditional_examples() {
        let t = triangle();
        let none = RcBoundaryPartition::none();
        let perc = RcParams::new(0.37, 1.0).unwrap();
        for code in 0..8 {
            assert!((rc_edge_conditional(&t, 0, &BondConfig::from_code(3, code), &perc, &none) - 0.37).abs() < 1e-15);
        }
        let both = BondConfig::from_code(3, 0b110);
        for q in [1.0, 2.0, 3.5] {
            let rc = RcParams::new(0.6, q).unwrap();
            let oracle = enumerated_edge_conditional(&t, 0, &both, &rc);
            assert!((oracle - 0.6).abs() < 1e-12);
            assert!((rc_edge_conditional(&t, 0, &both, &rc, &none) - oracle).abs() < 1e-12);
        }
        let closed = BondConfig::empty(3);
        let oracle = enumerated_edge_conditional(&t, 0, &closed, &rc2(0.5));
        assert!((oracle - 1.0 / 3.0).abs() < 1e-12);
        assert!((rc_edge_conditional(&t, 0, &closed, &rc2(0.5), &none) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ghost_wiring_connects() {
        let g = build_box(2, 1).unwrap();
        // edge between two boundary vertices, all else closed: wired makes them connected
        let e = 0;
        let omega = BondConfig::empty(g.edge_count());
        let rc = rc2(0.5);
        assert_eq!(rc_edge_conditional(&g, e, &omega, &rc, &RcBoundaryPartition::wired(&g)), 0.5);
        assert!((rc_edge_conditional(&g, e, &omega, &rc, &RcBoundaryPartition::free(&g)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_horizon_rc_glauber() {
        let g = triangle();
        let mut omega = BondConfig::from_code(3, 5);
        let n = rc_glauber_run(&g, &mut omega, &mut EventStream::new(1, 3), 0.0, &rc2(0.5), &RcBoundaryPartition::none());
        assert_eq!(n, 0);
        assert_eq!(omega.code(), 5);
    }

    #[test]
    fn sw_extremes() {
        let g = build_torus(2, 4).unwrap();
        let none = SpinBoundary::none();
        let mut rng = rng_from_seed(3);
        let b0 = ModelParams::new(0.0).unwrap();
        let (omega, _) = swendsen_wang_step(&g, &SpinConfig::all_plus(16), &b0, &none, &mut rng).unwrap();
        assert_eq!(omega.open_count(), 0);
        let big = ModelParams::new(60.0).unwrap();
        let mut plus = 0;
        for _ in 0..400 {
            let (omega, s) = swendsen_wang_step(&g, &SpinConfig::all_plus(16), &big, &none, &mut rng).unwrap();
            assert_eq!(omega.open_count(), 32);
            assert_eq!(s.magnetization().abs(), 16);
            plus += (s.magnetization() > 0) as usize;
        }
        assert!((150..250).contains(&plus));
    }

    #[test]
    fn sw_with_plus_shell() {
        let g = build_box(2, 1).unwrap();
        let mut sw = SwendsenWang::new(&g, ModelParams::new(60.0).unwrap(), &SpinBoundary::all_plus(&g)).unwrap();
        let mut s = SpinConfig::all_plus(9);
        let mut rng = rng_from_seed(4);
        for _ in 0..50 {
            sw.step(&mut s, &mut rng);
            assert_eq!(s.magnetization(), 9);
        }
    }

    #[test]
    fn coloring_examples() {
        let g = build_box(2, 1).unwrap();
        let mut rng = rng_from_seed(1);
        let s = es_color(&g, &BondConfig::full(g.edge_count()), ColoringMode::PlusBoundary, &RcBoundaryPartition::wired(&g), &mut rng).unwrap();
        assert_eq!(s.magnetization(), 9);
        assert_eq!(
            es_color(&g, &BondConfig::full(12), ColoringMode::PlusBoundary, &RcBoundaryPartition::none(), &mut rng),
            Err(Error::MissingBoundaryBlock)
        );
        // clusters {0,1,2} and {3,4} on a path of 5
        let path = Graph::general(5, vec![[0, 1], [1, 2], [2, 3], [3, 4]]).unwrap();
        let omega = BondConfig::from_code(4, 0b1011);
        for _ in 0..200 {
            let s = es_color(&path, &omega, ColoringMode::LargestPlus, &RcBoundaryPartition::none(), &mut rng).unwrap();
            assert_eq!(&s.spins()[..3], &[1, 1, 1]);
        }
    }

    #[test]
    fn largest_tie_break_smallest_vertex() {
        let path = Graph::general(4, vec![[0, 1], [1, 2], [2, 3]]).unwrap();
        let lab = label_components(&path, &BondConfig::from_code(3, 0b101), &RcBoundaryPartition::none());
        assert_eq!(lab.largest(), Some(lab.labels[0]));
    }

    #[test]
    fn conditional_positive_acceptance_half_for_odd_n() {
        let g = build_torus(2, 5).unwrap();
        let mut rng = rng_from_seed(9);
        let omega = BondConfig::from_code(50, 0x2_4924_9249_2492);
        let trials = 20_000u64;
        let mut draws = 0;
        for _ in 0..trials {
            let (s, a) = es_color_conditional_positive(&g, &omega, &RcBoundaryPartition::none(), &mut rng);
            assert!(s.magnetization() >= 0);
            draws += a;
        }
        let rate = trials as f64 / draws as f64;
        let se = (0.25 / draws as f64).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * se, "rate {rate}");
    }

    #[test]
    fn shared_coloring_identical_inputs() {
        let g = build_torus(2, 4).unwrap();
        let mut rng = rng_from_seed(2);
        let omega = BondConfig::from_code(32, 0xF0F0_1234);
        let ids: Vec<u32> = (0..16).collect();
        let xi = RcBoundaryPartition::none();
        let side = ColoringSide { graph: &g, omega: &omega, xi: &xi, forced: ForcedCluster::Largest, global_ids: &ids };
        for _ in 0..100 {
            let c = shared_enumeration_color(&side, &side, &ids, &mut rng).unwrap();
            assert_eq!(c.sigma, c.sigma_prime);
        }
    }

    #[test]
    fn shared_coloring_region_agreement_and_negative_control() {
        // path 0-1-2-3-4-5, region R = {0,1,2}
        let g = Graph::general(6, (0..5).map(|i| [i, i + 1]).collect()).unwrap();
        let ids: Vec<u32> = (0..6).collect();
        let xi = RcBoundaryPartition::none();
        let a = BondConfig::from_code(5, 0b00011);
        // differs only on edges outside R, same partition on R
        let b = BondConfig::from_code(5, 0b11011);
        let region = [0u32, 1, 2];
        let mut rng = rng_from_seed(5);
        let sa = ColoringSide { graph: &g, omega: &a, xi: &xi, forced: ForcedCluster::None, global_ids: &ids };
        let sb = ColoringSide { graph: &g, omega: &b, xi: &xi, forced: ForcedCluster::None, global_ids: &ids };
        for _ in 0..10_000 {
            let c = shared_enumeration_color(&sa, &sb, &ids, &mut rng).unwrap();
            assert!(c.disagreements(&sa, &sb, &region).is_empty());
        }
        // split differently inside R: {0},{1,2} vs {0,1,2}
        let c_split = BondConfig::from_code(5, 0b00010);
        let sc = ColoringSide { graph: &g, omega: &c_split, xi: &xi, forced: ForcedCluster::None, global_ids: &ids };
        let mut seen = 0;
        for _ in 0..1000 {
            let c = shared_enumeration_color(&sa, &sc, &ids, &mut rng).unwrap();
            seen += !c.disagreements(&sa, &sc, &region).is_empty() as usize;
        }
        assert!(seen > 0);
    }

    #[test]
    fn bond_text_roundtrip() {
        let b = BondConfig::from_code(7, 0b1011001);
        assert_eq!(BondConfig::from_text(&b.to_text()).unwrap(), b);
        assert!(BondConfig::from_text("3 2\n101\n").is_ok());
        assert!(BondConfig::from_text("3 3\n101\n").is_err());
    }

    proptest! {
        #[test]
        fn edge_conditional_monotone(lo in 0usize..(1 << 12), extra in 0usize..(1 << 12), e in 0usize..12, p in 0.05f64..0.95) {
            let g = build_box(2, 1).unwrap();
            let rc = rc2(p);
            let xi = RcBoundaryPartition::free(&g);
            let small = BondConfig::from_code(12, lo);
            let big = BondConfig::from_code(12, lo | extra);
            prop_assert!(rc_edge_conditional(&g, e, &big, &rc, &xi) >= rc_edge_conditional(&g, e, &small, &rc, &xi));
        }
    }
}
