//! Graph families: periodic tori, boxes with a frozen spin shell, and general
//! simple graphs (random regular graphs, ball subgraphs).
//!
//! Indexing is canonical. Torus vertices are row-major over coordinates in
//! `0..n` (first coordinate most significant). Box vertices are row-major over
//! `-m..=m`. Frozen shell vertices of a box are the vertices of `Λ_{m+1}` with
//! some coordinate equal to `±(m+1)`, in row-major order of `Λ_{m+1}`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Torus,
    Box,
    General,
}

impl GraphKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Torus => "torus",
            GraphKind::Box => "box",
            GraphKind::General => "general",
        }
    }
}

/// Frozen (non-updated) vertices adjacent to the free part of a graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrozenShell {
    pub count: usize,
    /// Coordinates of frozen vertices (`count * dim`), empty for general graphs.
    pub coords: Vec<i32>,
    offsets: Vec<u32>,
    links: Vec<u32>,
}

impl FrozenShell {
    fn from_links(count: usize, coords: Vec<i32>, per_vertex: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(per_vertex.len() + 1);
        let mut links = Vec::new();
        offsets.push(0);
        for l in per_vertex {
            links.extend(l);
            offsets.push(links.len() as u32);
        }
        Self { count, coords, offsets, links }
    }

    /// Frozen neighbors of free vertex `v`.
    pub fn links_of(&self, v: usize) -> &[u32] {
        if self.offsets.is_empty() {
            return &[];
        }
        &self.links[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    /// All `(free, frozen)` links in free-vertex order.
    pub fn link_pairs(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.links.len());
        for v in 0..self.offsets.len().saturating_sub(1) {
            for &f in self.links_of(v) {
                out.push((v as u32, f));
            }
        }
        out
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub kind: GraphKind,
    pub dim: usize,
    /// Torus side `n`, box half-side `m`, 0 for general graphs.
    pub side: usize,
    n: usize,
    edges: Vec<[u32; 2]>,
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    incident: Vec<u32>,
    coords: Vec<i32>,
    inner_boundary: Vec<u32>,
    pub frozen: FrozenShell,
    max_degree: usize,
}

impl Graph {
    fn assemble(
        kind: GraphKind,
        dim: usize,
        side: usize,
        n: usize,
        edges: Vec<[u32; 2]>,
        coords: Vec<i32>,
        inner_boundary: Vec<u32>,
        frozen: FrozenShell,
    ) -> Self {
        let mut deg = vec![0u32; n];
        for e in &edges {
            deg[e[0] as usize] += 1;
            deg[e[1] as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + deg[v];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0u32; 2 * edges.len()];
        let mut incident = vec![0u32; 2 * edges.len()];
        for (i, e) in edges.iter().enumerate() {
            let (a, b) = (e[0] as usize, e[1] as usize);
            neighbors[fill[a] as usize] = b as u32;
            incident[fill[a] as usize] = i as u32;
            fill[a] += 1;
            neighbors[fill[b] as usize] = a as u32;
            incident[fill[b] as usize] = i as u32;
            fill[b] += 1;
        }
        let max_degree = deg.iter().copied().max().unwrap_or(0) as usize;
        Self {
            kind,
            dim,
            side,
            n,
            edges,
            offsets,
            neighbors,
            incident,
            coords,
            inner_boundary,
            frozen,
            max_degree,
        }
    }

    /// Simple graph from an explicit edge list.
    pub fn general(n: usize, edges: Vec<[u32; 2]>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for e in &edges {
            if e[0] == e[1] {
                return Err(Error::DegenerateGeometry(format!("self-loop at {}", e[0])));
            }
            if e[0] as usize >= n || e[1] as usize >= n {
                return Err(Error::DegenerateGeometry(format!("edge {:?} out of range", e)));
            }
            let key = (e[0].min(e[1]), e[0].max(e[1]));
            if !seen.insert(key) {
                return Err(Error::DegenerateGeometry(format!("parallel edge {:?}", key)));
            }
        }
        Ok(Self::assemble(
            GraphKind::General,
            0,
            0,
            n,
            edges,
            Vec::new(),
            Vec::new(),
            FrozenShell::default(),
        ))
    }

    /// General graph carrying an explicit frozen shell.
    pub fn general_with_frozen(
        n: usize,
        edges: Vec<[u32; 2]>,
        frozen_count: usize,
        links: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let mut g = Self::general(n, edges)?;
        if links.len() != n {
            return Err(Error::DegenerateGeometry("link table length".into()));
        }
        g.frozen = FrozenShell::from_links(frozen_count, Vec::new(), links);
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[u32; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        (self.edges[e][0] as usize, self.edges[e][1] as usize)
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    /// Edge indices incident to `v`, aligned with [`Graph::neighbors`].
    pub fn incident_edges(&self, v: usize) -> &[u32] {
        &self.incident[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }

    /// Degree counting frozen neighbors.
    pub fn full_degree(&self, v: usize) -> usize {
        self.degree(v) + self.frozen.links_of(v).len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Vertices of the free graph on its inner boundary (used for
    /// random-cluster boundary partitions). Empty for tori and general graphs.
    pub fn inner_boundary(&self) -> &[u32] {
        &self.inner_boundary
    }

    pub fn set_inner_boundary(&mut self, b: Vec<u32>) {
        self.inner_boundary = b;
    }

    pub fn coords(&self, v: usize) -> Option<&[i32]> {
        if self.coords.is_empty() {
            None
        } else {
            Some(&self.coords[v * self.dim..(v + 1) * self.dim])
        }
    }

    pub fn is_lattice(&self) -> bool {
        !self.coords.is_empty()
    }

    /// ℓ∞ distance for lattice graphs (periodic on the torus).
    pub fn linf_distance(&self, u: usize, v: usize) -> Option<usize> {
        let (a, b) = (self.coords(u)?, self.coords(v)?);
        Some(a.iter().zip(b).map(|(&x, &y)| self.axis_gap(x, y)).max().unwrap_or(0))
    }

    /// ℓ1 distance for lattice graphs (periodic on the torus).
    pub fn l1_distance(&self, u: usize, v: usize) -> Option<usize> {
        let (a, b) = (self.coords(u)?, self.coords(v)?);
        Some(a.iter().zip(b).map(|(&x, &y)| self.axis_gap(x, y)).sum())
    }

    fn axis_gap(&self, x: i32, y: i32) -> usize {
        let g = (x - y).unsigned_abs() as usize;
        if self.kind == GraphKind::Torus {
            g.min(self.side - g)
        } else {
            g
        }
    }

    /// Index of a lattice point; torus coordinates are reduced mod `n`.
    pub fn index_of(&self, x: &[i32]) -> Option<usize> {
        match self.kind {
            GraphKind::Torus => {
                let n = self.side as i32;
                Some(x.iter().fold(0usize, |acc, &c| acc * self.side + c.rem_euclid(n) as usize))
            }
            GraphKind::Box => {
                let m = self.side as i32;
                if x.iter().any(|&c| c.abs() > m) {
                    return None;
                }
                let w = 2 * self.side + 1;
                Some(x.iter().fold(0usize, |acc, &c| acc * w + (c + m) as usize))
            }
            GraphKind::General => None,
        }
    }

    /// Text edge list: header `kind d n N`, then `u v` per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {} {}", self.kind.as_str(), self.dim, self.side, self.n);
        for e in &self.edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        s
    }

    /// Parse the text edge-list format. Lattice headers rebuild the lattice
    /// and check the edge list against it.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let (d, side, n) = (num(h[1])?, num(h[2])?, num(h[3])?);
        let mut edges = Vec::new();
        for l in lines {
            let p: Vec<&str> = l.split_whitespace().collect();
            if p.len() != 2 {
                return Err(Error::Parse(format!("bad edge line {l:?}")));
            }
            edges.push([num(p[0])? as u32, num(p[1])? as u32]);
        }
        let g = match h[0] {
            "torus" => build_torus(d, side)?,
            "box" => build_box(d, side)?,
            "general" => return Graph::general(n, edges),
            other => return Err(Error::Parse(format!("unknown kind {other:?}"))),
        };
        if g.n != n || g.edges != edges {
            return Err(Error::Parse("edge list does not match lattice header".into()));
        }
        Ok(g)
    }
}

/// Periodic lattice `(ℤ/nℤ)^d`.
pub fn build_torus(d: usize, n: usize) -> Result<Graph> {
    if d < 2 {
        return Err(Error::DegenerateGeometry(format!("torus dimension {d} < 2")));
    }
    if n < 3 {
        return Err(Error::DegenerateGeometry(format!("torus side {n} < 3 gives parallel edges")));
    }
    let count = n.checked_pow(d as u32).ok_or_else(|| Error::DegenerateGeometry("overflow".into()))?;
    let mut coords = vec![0i32; count * d];
    for v in 0..count {
        let mut r = v;
        for i in (0..d).rev() {
            coords[v * d + i] = (r % n) as i32;
            r /= n;
        }
    }
    let mut edges = Vec::with_capacity(d * count);
    let stride: Vec<usize> = (0..d).map(|i| n.pow((d - 1 - i) as u32)).collect();
    for v in 0..count {
        for i in 0..d {
            let x = coords[v * d + i] as usize;
            let w = if x + 1 == n { v - x * stride[i] } else { v + stride[i] };
            edges.push([v as u32, w as u32]);
        }
    }
    Ok(Graph::assemble(
        GraphKind::Torus,
        d,
        n,
        count,
        edges,
        coords,
        Vec::new(),
        FrozenShell::default(),
    ))
}

fn box_points(d: usize, m: i32) -> Vec<Vec<i32>> {
    let w = (2 * m + 1) as usize;
    let total = w.pow(d as u32);
    (0..total)
        .map(|mut r| {
            let mut x = vec![0i32; d];
            for i in (0..d).rev() {
                x[i] = (r % w) as i32 - m;
                r /= w;
            }
            x
        })
        .collect()
}

/// Box `Λ_m = [-m, m]^d` with nearest-neighbor edges and a frozen shell on
/// `∂Λ_{m+1}`. The geometry does not depend on the boundary spins.
pub fn build_box(d: usize, m: usize) -> Result<Graph> {
    if d < 1 {
        return Err(Error::DegenerateGeometry("box dimension 0".into()));
    }
    let mi = m as i32;
    let pts = box_points(d, mi);
    let count = pts.len();
    let coords: Vec<i32> = pts.iter().flatten().copied().collect();
    let w = 2 * m + 1;
    let stride: Vec<usize> = (0..d).map(|i| w.pow((d - 1 - i) as u32)).collect();
    let mut edges = Vec::new();
    let mut inner = Vec::new();
    for (v, x) in pts.iter().enumerate() {
        for i in 0..d {
            if x[i] < mi {
                edges.push([v as u32, (v + stride[i]) as u32]);
            }
        }
        if x.iter().any(|c| c.abs() == mi) {
            inner.push(v as u32);
        }
    }
    // frozen shell: points of Λ_{m+1} with some |x_i| = m+1
    let outer = box_points(d, mi + 1);
    let mut frozen_index = std::collections::HashMap::new();
    let mut frozen_coords = Vec::new();
    for x in &outer {
        if x.iter().any(|c| c.abs() == mi + 1) {
            frozen_index.insert(x.clone(), frozen_index.len() as u32);
            frozen_coords.extend_from_slice(x);
        }
    }
    let mut links = vec![Vec::new(); count];
    for (v, x) in pts.iter().enumerate() {
        for i in 0..d {
            for s in [-1, 1] {
                let mut y = x.clone();
                y[i] += s;
                if y[i].abs() == mi + 1 {
                    links[v].push(frozen_index[&y]);
                }
            }
        }
    }
    let frozen = FrozenShell::from_links(frozen_index.len(), frozen_coords, links);
    Ok(Graph::assemble(GraphKind::Box, d, m, count, edges, coords, inner, frozen))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularGraphSpec {
    pub n: usize,
    pub degree: usize,
    pub seed: u64,
}

/// Default number of whole-matching attempts before giving up.
pub const REGULAR_RETRY_CAP: usize = 100_000;

/// Uniform simple `Δ`-regular graph by the configuration model with
/// whole-matching rejection. Edges are returned sorted with `u < v`.
pub fn random_regular(spec: RegularGraphSpec) -> Result<Graph> {
    random_regular_with_cap(spec, REGULAR_RETRY_CAP)
}

pub fn random_regular_with_cap(spec: RegularGraphSpec, cap: usize) -> Result<Graph> {
    let RegularGraphSpec { n, degree, seed } = spec;
    if (n * degree) % 2 != 0 {
        return Err(Error::Parity { n, degree });
    }
    if degree >= n {
        return Err(Error::DegenerateGeometry(format!("degree {degree} >= N {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut stubs: Vec<u32> = (0..n).flat_map(|v| std::iter::repeat_n(v as u32, degree)).collect();
    for _ in 0..cap {
        stubs.shuffle(&mut rng);
        let mut edges: Vec<[u32; 2]> = stubs
            .chunks_exact(2)
            .map(|c| [c[0].min(c[1]), c[0].max(c[1])])
            .collect();
        if edges.iter().any(|e| e[0] == e[1]) {
            continue;
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        return Graph::general(n, edges);
    }
    Err(Error::RetryCapExceeded { attempts: cap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallMetric {
    LInf,
    GraphDistance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallView {
    pub center: usize,
    pub radius: usize,
    pub metric: BallMetric,
    /// Sorted vertex indices within distance `radius`.
    pub interior: Vec<u32>,
    /// Sorted vertices at distance `radius + 1` adjacent to the interior.
    pub boundary: Vec<u32>,
}

fn bfs_distances(g: &Graph, v: usize, limit: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.n];
    let mut q = VecDeque::new();
    dist[v] = 0;
    q.push_back(v);
    while let Some(u) = q.pop_front() {
        if dist[u] >= limit {
            continue;
        }
        for &w in g.neighbors(u) {
            let w = w as usize;
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                q.push_back(w);
            }
        }
    }
    dist
}

/// Ball of radius `r` about `v`: ℓ∞ on lattices, graph distance otherwise.
pub fn ball(g: &Graph, v: usize, r: usize) -> Result<BallView> {
    if g.kind == GraphKind::Torus && 2 * r + 1 >= g.side {
        return Err(Error::BallWraps { radius: r, side: g.side });
    }
    let (metric, dist): (BallMetric, Vec<usize>) = if g.is_lattice() {
        (BallMetric::LInf, (0..g.n).map(|w| g.linf_distance(v, w).unwrap()).collect())
    } else {
        (BallMetric::GraphDistance, bfs_distances(g, v, r + 1))
    };
    let interior: Vec<u32> = (0..g.n).filter(|&w| dist[w] <= r).map(|w| w as u32).collect();
    let boundary: Vec<u32> = (0..g.n)
        .filter(|&w| dist[w] == r + 1 && g.neighbors(w).iter().any(|&u| dist[u as usize] <= r))
        .map(|w| w as u32)
        .collect();
    Ok(BallView { center: v, radius: r, metric, interior, boundary })
}

/// Graph induced on a ball interior, with the ball boundary as a frozen
/// shell. Returns the subgraph and the map from sub-indices to `g` indices
/// (interior first, then frozen in the order of `b.boundary`).
pub fn ball_subgraph(g: &Graph, b: &BallView) -> (Graph, Vec<u32>) {
    let mut local = vec![u32::MAX; g.n];
    for (i, &v) in b.interior.iter().enumerate() {
        local[v as usize] = i as u32;
    }
    let mut frozen_local = vec![u32::MAX; g.n];
    for (i, &v) in b.boundary.iter().enumerate() {
        frozen_local[v as usize] = i as u32;
    }
    let mut edges = Vec::new();
    for e in g.edges() {
        let (a, c) = (local[e[0] as usize], local[e[1] as usize]);
        if a != u32::MAX && c != u32::MAX {
            edges.push([a, c]);
        }
    }
    let mut links = vec![Vec::new(); b.interior.len()];
    for (i, &v) in b.interior.iter().enumerate() {
        for &w in g.neighbors(v as usize) {
            if frozen_local[w as usize] != u32::MAX {
                links[i].push(frozen_local[w as usize]);
            }
        }
    }
    let mut sub = Graph::assemble(
        GraphKind::General,
        g.dim,
        b.radius,
        b.interior.len(),
        edges,
        Vec::new(),
        Vec::new(),
        FrozenShell::from_links(b.boundary.len(), Vec::new(), links),
    );
    if let (true, Some(c0)) = (g.is_lattice(), g.coords(b.center)) {
        let c0 = c0.to_vec();
        let rel = |v: u32| -> Vec<i32> {
            let c = g.coords(v as usize).unwrap();
            c.iter()
                .zip(&c0)
                .map(|(&x, &y)| {
                    let mut dlt = x - y;
                    if g.kind == GraphKind::Torus {
                        let n = g.side as i32;
                        dlt = dlt.rem_euclid(n);
                        if dlt > n / 2 {
                            dlt -= n;
                        }
                    }
                    dlt
                })
                .collect()
        };
        sub.coords = b.interior.iter().flat_map(|&v| rel(v)).collect();
        sub.frozen.coords = b.boundary.iter().flat_map(|&v| rel(v)).collect();
    }
    let map = b.interior.iter().chain(&b.boundary).copied().collect();
    (sub, map)
}

/// Exact rational value `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Self {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 { a } else { gcd(b, a % b) }
        }
        let g = gcd(num, den).max(1);
        Self { num: num / g, den: den / g }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn less_than(self, o: Rational) -> bool {
        (self.num as u128) * (o.den as u128) < (o.num as u128) * (self.den as u128)
    }
}

impl std::fmt::Display for Rational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

pub const EXPANSION_VERTEX_CAP: usize = 24;

/// Exact edge expansion `min |E(S,S^c)| / |S|` over nonempty `|S| ≤ N/2`,
/// by a Gray-code walk over all subsets.
pub fn edge_expansion_exact(g: &Graph) -> Result<Rational> {
    let n = g.n;
    if n > EXPANSION_VERTEX_CAP {
        return Err(Error::SizeCap { what: "vertex count", size: n, cap: EXPANSION_VERTEX_CAP });
    }
    if n < 2 {
        return Err(Error::DegenerateGeometry("expansion needs at least 2 vertices".into()));
    }
    let adj: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &w| m | (1 << w)))
        .collect();
    let mut set = 0u32;
    let mut cut: i64 = 0;
    let mut best: Option<Rational> = None;
    for i in 1u32..(1u32 << n) {
        let v = i.trailing_zeros() as usize;
        let inside = (adj[v] & set).count_ones() as i64;
        let deg = g.degree(v) as i64;
        if set & (1 << v) == 0 {
            cut += deg - 2 * inside;
        } else {
            cut -= deg - 2 * inside;
        }
        set ^= 1 << v;
        let size = set.count_ones() as usize;
        if size >= 1 && 2 * size <= n {
            let r = Rational::new(cut as u64, size as u64);
            if best.is_none_or(|b| r.less_than(b)) {
                best = Some(r);
            }
        }
    }
    Ok(best.expect("n >= 2 has a singleton"))
}

/// Cycle rank `|E(B)| - |V(B)| + c(B)` of the ball subgraph: the minimum
/// number of edge removals that leave a forest.
pub fn tree_like_defect(g: &Graph, v: usize, r: usize) -> Result<usize> {
    let view = match ball(g, v, r) {
        Ok(b) => b,
        // the ball of a torus may wrap; the defect is then over the whole graph
        Err(Error::BallWraps { .. }) => BallView {
            center: v,
            radius: r,
            metric: BallMetric::LInf,
            interior: (0..g.n as u32).collect(),
            boundary: Vec::new(),
        },
        Err(e) => return Err(e),
    };
    let (sub, _) = ball_subgraph(g, &view);
    Ok(cycle_rank(&sub))
}

pub fn cycle_rank(g: &Graph) -> usize {
    let mut uf = crate::unionfind::UnionFind::new(g.n);
    for e in g.edges() {
        uf.union(e[0] as usize, e[1] as usize);
    }
    g.edge_count() + uf.count() - g.n
}
