//! k-block coarse-graining of random-cluster configurations.
//!
//! Blocks are ℓ∞ balls of radius `k` around centers on `kℤ^d`. On a box
//! `Λ_m` whose half-width is not a multiple of `k` the last center on each
//! axis is clamped to `±m`; boundary blocks are truncated to `Λ_m`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Graph, GraphKind};
use crate::random_cluster::BondConfig;
use crate::unionfind::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adjacency {
    /// Nearest centers.
    K,
    /// Diagonals included.
    KStar,
}

#[derive(Debug, Clone)]
struct Block {
    vertices: Vec<u32>,
    faces: Vec<u8>,
    /// Local endpoints and global edge id.
    edges: Vec<(u16, u16, u32)>,
}

#[derive(Debug, Clone)]
pub struct BlockGrid {
    k: usize,
    d: usize,
    periodic: bool,
    side: usize,
    axis: Vec<i32>,
    blocks: Vec<Block>,
}

fn edge_between(g: &Graph, a: usize, b: usize) -> Option<u32> {
    g.neighbors(a).iter().zip(g.incident_edges(a)).find(|(&w, _)| w as usize == b).map(|(_, &e)| e)
}

impl BlockGrid {
    pub fn new(g: &Graph, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("block radius k must be ≥ 1".into()));
        }
        let d = g.dim;
        let side = g.side;
        let (periodic, axis): (bool, Vec<i32>) = match g.kind {
            GraphKind::Torus => {
                if !side.is_multiple_of(k) || side < 2 * k + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "torus side {side} must be a multiple of k={k} and at least 2k+1"
                    )));
                }
                (true, (0..side / k).map(|j| (j * k) as i32).collect())
            }
            GraphKind::Box => {
                let m = side as i32;
                let kk = k as i32;
                let mut a: Vec<i32> = (-(m / kk)..=(m / kk)).map(|j| j * kk).collect();
                if m % kk != 0 {
                    a.insert(0, -m);
                    a.push(m);
                }
                (false, a)
            }
            GraphKind::General => {
                return Err(Error::DegenerateGeometry("coarse-graining needs a lattice".into()));
            }
        };
        let mut grid = Self { k, d, periodic, side, axis, blocks: Vec::new() };
        let count = grid.center_count();
        let mut blocks = Vec::with_capacity(count);
        for c in 0..count {
            blocks.push(grid.build_block(g, c));
        }
        grid.blocks = blocks;
        Ok(grid)
    }

    fn build_block(&self, g: &Graph, c: usize) -> Block {
        let x = self.center_coords(c);
        let k = self.k as i32;
        let (lo, hi): (Vec<i32>, Vec<i32>) = x
            .iter()
            .map(|&xi| {
                if self.periodic {
                    (xi - k, xi + k)
                } else {
                    let m = self.side as i32;
                    ((xi - k).max(-m), (xi + k).min(m))
                }
            })
            .unzip();
        let dims: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as usize).collect();
        let total: usize = dims.iter().product();
        let mut vertices = Vec::with_capacity(total);
        let mut faces = Vec::with_capacity(total);
        let mut y = vec![0i32; self.d];
        for idx in 0..total {
            let mut r = idx;
            let mut mask = 0u8;
            for i in (0..self.d).rev() {
                let off = (r % dims[i]) as i32;
                r /= dims[i];
                y[i] = lo[i] + off;
                if y[i] == lo[i] {
                    mask |= 1 << (2 * i);
                }
                if y[i] == hi[i] {
                    mask |= 1 << (2 * i + 1);
                }
            }
            vertices.push(g.index_of(&y).expect("block inside lattice") as u32);
            faces.push(mask);
        }
        let mut edges = Vec::new();
        let mut stride = 1usize;
        for i in (0..self.d).rev() {
            for idx in 0..total {
                let off = idx / stride % dims[i];
                if off + 1 < dims[i] {
                    let j = idx + stride;
                    let e = edge_between(g, vertices[idx] as usize, vertices[j] as usize)
                        .expect("adjacent lattice sites share an edge");
                    edges.push((idx as u16, j as u16, e));
                }
            }
            stride *= dims[i];
        }
        Block { vertices, faces, edges }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Lattice side: `n` on the torus, half-width `m` on the box.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn centers_per_axis(&self) -> usize {
        self.axis.len()
    }

    pub fn center_count(&self) -> usize {
        self.axis.len().pow(self.d as u32)
    }

    pub fn center_multi(&self, c: usize) -> Vec<usize> {
        let na = self.axis.len();
        let mut out = vec![0; self.d];
        let mut r = c;
        for i in (0..self.d).rev() {
            out[i] = r % na;
            r /= na;
        }
        out
    }

    pub fn center_from_multi(&self, j: &[usize]) -> usize {
        j.iter().fold(0, |acc, &x| acc * self.axis.len() + x)
    }

    pub fn center_coords(&self, c: usize) -> Vec<i32> {
        self.center_multi(c).into_iter().map(|j| self.axis[j]).collect()
    }

    /// ℓ∞ norm of a center; torus coordinates are read in `[-n/2, n/2)`.
    pub fn center_norm(&self, c: usize) -> i32 {
        self.center_coords(c)
            .into_iter()
            .map(|x| if self.periodic { x.min(self.side as i32 - x) } else { x.abs() })
            .max()
            .unwrap_or(0)
    }

    pub fn block_vertices(&self, c: usize) -> &[u32] {
        &self.blocks[c].vertices
    }

    pub fn block_edges(&self, c: usize) -> impl Iterator<Item = u32> + '_ {
        self.blocks[c].edges.iter().map(|&(_, _, e)| e)
    }

    pub fn neighbors(&self, c: usize, adj: Adjacency) -> Vec<usize> {
        let na = self.axis.len() as i64;
        let j = self.center_multi(c);
        let mut out = Vec::new();
        let mut delta = vec![-1i64; self.d];
        loop {
            let nonzero = delta.iter().filter(|&&x| x != 0).count();
            let ok = match adj {
                Adjacency::K => nonzero == 1,
                Adjacency::KStar => nonzero >= 1,
            };
            if ok {
                let mut t = Vec::with_capacity(self.d);
                let mut valid = true;
                for i in 0..self.d {
                    let mut x = j[i] as i64 + delta[i];
                    if self.periodic {
                        x = x.rem_euclid(na);
                    } else if x < 0 || x >= na {
                        valid = false;
                        break;
                    }
                    t.push(x as usize);
                }
                if valid {
                    let w = self.center_from_multi(&t);
                    if w != c && !out.contains(&w) {
                        out.push(w);
                    }
                }
            }
            let mut i = 0;
            while i < self.d {
                delta[i] += 1;
                if delta[i] <= 1 {
                    break;
                }
                delta[i] = -1;
                i += 1;
            }
            if i == self.d {
                break;
            }
        }
        out.sort_unstable();
        out
    }

    /// Centers `x` with `|x|∞ ≤ r`.
    pub fn centers_within(&self, r: i32) -> Vec<usize> {
        (0..self.center_count()).filter(|&c| self.center_norm(c) <= r).collect()
    }

    /// Centers with `|x|∞ = r`.
    pub fn centers_at(&self, r: i32) -> Vec<usize> {
        (0..self.center_count()).filter(|&c| self.center_norm(c) == r).collect()
    }

    /// Outermost ring of centers on a box.
    pub fn outer_ring(&self) -> Vec<usize> {
        let last = self.axis.len() - 1;
        (0..self.center_count())
            .filter(|&c| self.center_multi(c).iter().any(|&j| j == 0 || j == last))
            .collect()
    }

    fn good_block(&self, c: usize, omega: &BondConfig, uf: &mut UnionFind) -> bool {
        let b = &self.blocks[c];
        classify_block(b.vertices.len(), b.edges.iter().map(|&(u, v, e)| (u, v, omega.is_open(e as usize))), &b.faces, self.d, self.k, uf)
    }

    fn same_on_block(&self, c: usize, a: &BondConfig, b: &BondConfig) -> bool {
        self.blocks[c].edges.iter().all(|&(_, _, e)| a.is_open(e as usize) == b.is_open(e as usize))
    }
}

fn classify_block(
    n: usize,
    edges: impl Iterator<Item = (u16, u16, bool)>,
    faces: &[u8],
    d: usize,
    k: usize,
    uf: &mut UnionFind,
) -> bool {
    if uf.len() < n {
        *uf = UnionFind::new(n);
    }
    uf.reset();
    for (u, v, open) in edges {
        if open {
            uf.union(u as usize, v as usize);
        }
    }
    let mut masks = vec![0u8; n];
    let mut big = 0;
    for v in 0..n {
        let r = uf.find(v);
        masks[r] |= faces[v];
        if r == v && uf.set_size(v) >= k {
            big += 1;
        }
    }
    let full = ((1u16 << (2 * d)) - 1) as u8;
    big <= 1 && masks.contains(&full)
}

/// k-good test for a bond configuration on a full box graph (as built by
/// [`crate::geometry::build_box`] with radius `k`).
pub fn k_good(block: &Graph, omega: &BondConfig, k: usize) -> Result<bool> {
    if block.kind != GraphKind::Box || block.side != k {
        return Err(Error::InvalidParameter("k_good expects a box of radius k".into()));
    }
    let m = k as i32;
    let faces: Vec<u8> = (0..block.vertex_count())
        .map(|v| {
            block.coords(v).unwrap().iter().enumerate().fold(0u8, |acc, (i, &x)| {
                acc | if x == -m { 1 << (2 * i) } else { 0 } | if x == m { 1 << (2 * i + 1) } else { 0 }
            })
        })
        .collect();
    let mut uf = UnionFind::new(block.vertex_count());
    let edges = block.edges().iter().enumerate().map(|(e, ed)| (ed[0] as u16, ed[1] as u16, omega.is_open(e)));
    Ok(classify_block(block.vertex_count(), edges, &faces, block.dim, k, &mut uf))
}

pub fn very_good(block: &Graph, omega: &BondConfig, omega_prime: &BondConfig, k: usize) -> Result<bool> {
    Ok(omega == omega_prime && k_good(block, omega, k)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSource {
    Single,
    Pair,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseField {
    pub k: usize,
    pub d: usize,
    pub side: usize,
    pub per_axis: usize,
    pub source: FieldSource,
    pub values: Vec<u8>,
}

impl CoarseField {
    pub fn get(&self, c: usize) -> bool {
        self.values[c] == 1
    }

    pub fn bad_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0).count()
    }

    pub fn bad_density(&self) -> f64 {
        self.bad_count() as f64 / self.values.len() as f64
    }

    /// `k d side` header, then rows of `0`/`1` over the last axis.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.k, self.d, self.side);
        for row in self.values.chunks(self.per_axis) {
            s.extend(row.iter().map(|&v| if v == 1 { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let h: Vec<usize> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field".into()))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if h.len() != 3 {
            return Err(Error::Parse("field header must be `k d side`".into()));
        }
        let mut values = Vec::new();
        let mut per_axis = 0;
        for l in lines.filter(|l| !l.is_empty()) {
            per_axis = l.len();
            for ch in l.chars() {
                values.push(match ch {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::Parse(format!("bad field character {ch:?}"))),
                });
            }
        }
        if per_axis == 0 || values.len() != per_axis.pow(h[1] as u32) {
            return Err(Error::Parse("field size does not match header".into()));
        }
        Ok(Self { k: h[0], d: h[1], side: h[2], per_axis, source: FieldSource::Single, values })
    }
}

fn field_shell(grid: &BlockGrid, source: FieldSource, values: Vec<u8>) -> CoarseField {
    CoarseField { k: grid.k, d: grid.d, side: grid.side, per_axis: grid.centers_per_axis(), source, values }
}

/// k-good field of one configuration.
pub fn coarse_field(grid: &BlockGrid, omega: &BondConfig) -> CoarseField {
    let mut uf = UnionFind::new(0);
    let values = (0..grid.center_count()).map(|c| grid.good_block(c, omega, &mut uf) as u8).collect();
    field_shell(grid, FieldSource::Single, values)
}

/// Very-good field of a pair.
pub fn coarse_field_pair(grid: &BlockGrid, omega: &BondConfig, omega_prime: &BondConfig) -> CoarseField {
    let mut uf = UnionFind::new(0);
    let values = (0..grid.center_count())
        .map(|c| (grid.same_on_block(c, omega, omega_prime) && grid.good_block(c, omega, &mut uf)) as u8)
        .collect();
    field_shell(grid, FieldSource::Pair, values)
}

/// Very-good status of a single block.
pub fn block_very_good(grid: &BlockGrid, c: usize, omega: &BondConfig, omega_prime: &BondConfig) -> bool {
    let mut uf = UnionFind::new(0);
    grid.same_on_block(c, omega, omega_prime) && grid.good_block(c, omega, &mut uf)
}

/// Cluster labels over centers with value `state` (1 open, 0 closed);
/// other centers get `u32::MAX`.
pub fn star_clusters(grid: &BlockGrid, field: &CoarseField, adj: Adjacency, state: u8) -> Vec<u32> {
    let n = grid.center_count();
    let mut uf = UnionFind::new(n);
    for c in 0..n {
        if field.values[c] != state {
            continue;
        }
        for w in grid.neighbors(c, adj) {
            if w > c && field.values[w] == state {
                uf.union(c, w);
            }
        }
    }
    let mut labels = vec![u32::MAX; n];
    let mut map = vec![u32::MAX; n];
    let mut next = 0;
    for c in 0..n {
        if field.values[c] == state {
            let r = uf.find(c);
            if map[r] == u32::MAX {
                map[r] = next;
                next += 1;
            }
            labels[c] = map[r];
        }
    }
    labels
}

fn cluster_sizes(labels: &[u32]) -> Vec<usize> {
    let k = labels.iter().filter(|&&l| l != u32::MAX).max().map_or(0, |&m| m as usize + 1);
    let mut s = vec![0; k];
    for &l in labels {
        if l != u32::MAX {
            s[l as usize] += 1;
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceResult {
    pub exists: bool,
    pub gamma_k: Vec<u32>,
    pub int_k: Vec<u32>,
    pub ext_k: Vec<u32>,
    pub gamma: Vec<u32>,
    pub int: Vec<u32>,
    pub ext: Vec<u32>,
    /// On failure: a closed star-path of centers from the outer ring inward.
    pub witness: Vec<u32>,
}

/// Outermost open separating surface in the annulus between `Λ_l` and the
/// outer ring of a box grid. Requires `l + k < m`.
pub fn find_separating_surface(grid: &BlockGrid, g: &Graph, field: &CoarseField, l: usize) -> Result<SurfaceResult> {
    let (m, k) = (grid.side, grid.k);
    if grid.periodic || l + k >= m {
        return Err(Error::MalformedAnnulus { inner: l, outer: m, k });
    }
    let n = grid.center_count();
    let closed = star_clusters(grid, field, Adjacency::KStar, 0);
    let ring = grid.outer_ring();
    let mut in_d = vec![false; n];
    let mut parent = vec![u32::MAX; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &c in &ring {
        if closed[c] != u32::MAX && !in_d[c] {
            in_d[c] = true;
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        for w in grid.neighbors(c, Adjacency::KStar) {
            if closed[w] != u32::MAX && !in_d[w] {
                in_d[w] = true;
                parent[w] = c as u32;
                queue.push_back(w);
            }
        }
    }
    let reach = (l + k) as i32;
    if let Some(bad) = (0..n).find(|&c| in_d[c] && grid.center_norm(c) <= reach) {
        let mut witness = vec![bad as u32];
        let mut c = bad;
        while parent[c] != u32::MAX {
            c = parent[c] as usize;
            witness.push(c as u32);
        }
        witness.reverse();
        return Ok(SurfaceResult {
            exists: false,
            gamma_k: vec![],
            int_k: vec![],
            ext_k: vec![],
            gamma: vec![],
            int: vec![],
            ext: vec![],
            witness,
        });
    }
    let mut in_gamma = vec![false; n];
    for &c in &ring {
        if !in_d[c] {
            in_gamma[c] = true;
        }
    }
    for c in 0..n {
        if in_d[c] {
            for w in grid.neighbors(c, Adjacency::KStar) {
                if !in_d[w] {
                    in_gamma[w] = true;
                }
            }
        }
    }
    // exterior: star flood fill from the ring through non-surface centers
    let mut in_ext = vec![false; n];
    for &c in &ring {
        if !in_gamma[c] && !in_ext[c] {
            in_ext[c] = true;
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        for w in grid.neighbors(c, Adjacency::KStar) {
            if !in_gamma[w] && !in_ext[w] {
                in_ext[w] = true;
                queue.push_back(w);
            }
        }
    }
    let pick = |f: &dyn Fn(usize) -> bool| (0..n).filter(|&c| f(c)).map(|c| c as u32).collect::<Vec<u32>>();
    let gamma_k = pick(&|c| in_gamma[c]);
    let ext_k = pick(&|c| in_ext[c]);
    let int_k = pick(&|c| !in_gamma[c] && !in_ext[c]);
    let nv = g.vertex_count();
    let mut vg = vec![false; nv];
    for &c in &gamma_k {
        for &v in grid.block_vertices(c as usize) {
            vg[v as usize] = true;
        }
    }
    let mut ve = vec![false; nv];
    for &c in &ext_k {
        for &v in grid.block_vertices(c as usize) {
            ve[v as usize] = !vg[v as usize];
        }
    }
    let gamma = (0..nv as u32).filter(|&v| vg[v as usize]).collect();
    let ext = (0..nv as u32).filter(|&v| ve[v as usize]).collect();
    let int = (0..nv as u32).filter(|&v| !vg[v as usize] && !ve[v as usize]).collect();
    Ok(SurfaceResult { exists: true, gamma_k, int_k, ext_k, gamma, int, ext, witness: vec![] })
}

/// Checks that no star-adjacent pair of centers joins `Int` and `Ext`.
pub fn surface_separates(grid: &BlockGrid, s: &SurfaceResult) -> bool {
    let mut ext = vec![false; grid.center_count()];
    for &c in &s.ext_k {
        ext[c as usize] = true;
    }
    s.int_k.iter().all(|&c| grid.neighbors(c as usize, Adjacency::KStar).iter().all(|&w| !ext[w]))
}

/// Centers whose block meets `a`.
pub fn coarse_set(grid: &BlockGrid, a: &[u32]) -> Vec<usize> {
    let mut mark = std::collections::HashSet::new();
    for &v in a {
        mark.insert(v);
    }
    (0..grid.center_count()).filter(|&c| grid.block_vertices(c).iter().any(|v| mark.contains(v))).collect()
}

/// Labels of good k-clusters touching both the coarse image of `a` and the
/// centers at norm `target`.
fn crossing_clusters(grid: &BlockGrid, labels: &[u32], a: &[u32], target: i32) -> Vec<u32> {
    let mut start: Vec<u32> = coarse_set(grid, a).into_iter().map(|c| labels[c]).filter(|&l| l != u32::MAX).collect();
    start.sort_unstable();
    start.dedup();
    start
        .into_iter()
        .filter(|&l| (0..grid.center_count()).any(|c| labels[c] == l && grid.center_norm(c) == target))
        .collect()
}

/// Largest ω-cluster inside the union of the blocks of `centers`, using
/// edges of those blocks only.
fn largest_block_cluster(g: &Graph, grid: &BlockGrid, centers: &[usize], omega: &BondConfig) -> (Vec<u32>, usize) {
    let mut uf = UnionFind::new(g.vertex_count());
    let mut inside = vec![false; g.vertex_count()];
    for &c in centers {
        for &v in grid.block_vertices(c) {
            inside[v as usize] = true;
        }
        for e in grid.block_edges(c) {
            if omega.is_open(e as usize) {
                let (a, b) = g.edge(e as usize);
                uf.union(a, b);
            }
        }
    }
    let mut best = (usize::MAX, 0usize);
    for v in 0..g.vertex_count() {
        if inside[v] && uf.find(v) == v && uf.set_size(v) > best.1 {
            best = (v, uf.set_size(v));
        }
    }
    let members = (0..g.vertex_count())
        .filter(|&v| inside[v] && best.0 != usize::MAX && uf.same(v, best.0))
        .map(|v| v as u32)
        .collect();
    (members, best.1)
}

/// The event `E_{m,A}` on a box.
pub fn classify_e_ma(g: &Graph, grid: &BlockGrid, omega: &BondConfig, a: &[u32]) -> Result<bool> {
    if grid.periodic {
        return Err(Error::DegenerateGeometry("E_{m,A} is defined on a box".into()));
    }
    let field = coarse_field(grid, omega);
    let labels = star_clusters(grid, &field, Adjacency::K, 1);
    let mut full = UnionFind::new(g.vertex_count());
    for (e, ed) in g.edges().iter().enumerate() {
        if omega.is_open(e) {
            full.union(ed[0] as usize, ed[1] as usize);
        }
    }
    for l in crossing_clusters(grid, &labels, a, grid.side as i32 - grid.k as i32) {
        let centers: Vec<usize> = (0..grid.center_count()).filter(|&c| labels[c] == l).collect();
        let (members, _) = largest_block_cluster(g, grid, &centers, omega);
        let Some(&rep) = members.first() else { continue };
        if g.inner_boundary().iter().any(|&b| full.same(b as usize, rep as usize)) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The event `E^θ_{m,A}` on a torus of side `2m`; with `a = None` the path
/// requirement is dropped.
pub fn classify_e_m_theta(grid: &BlockGrid, omega: &BondConfig, a: Option<&[u32]>, theta: f64) -> Result<bool> {
    if !grid.periodic {
        return Err(Error::DegenerateGeometry("E^θ_{m,A} is defined on a torus".into()));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("θ = {theta}")));
    }
    let field = coarse_field(grid, omega);
    let labels = star_clusters(grid, &field, Adjacency::K, 1);
    let sizes = cluster_sizes(&labels);
    let m = grid.side / 2;
    let threshold = m as f64 / (4.0 * grid.k as f64);
    if sizes.iter().filter(|&&s| s as f64 > threshold).count() > 1 {
        return Ok(false);
    }
    let Some((largest, &size)) = sizes.iter().enumerate().max_by_key(|&(i, s)| (*s, std::cmp::Reverse(i))) else {
        return Ok(false);
    };
    if (size as f64) < theta * grid.center_count() as f64 {
        return Ok(false);
    }
    match a {
        None => Ok(true),
        Some(a) => {
            let target = m as i32 - grid.k as i32;
            Ok(crossing_clusters(grid, &labels, a, target).contains(&(largest as u32)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationViolation {
    pub cluster_size: usize,
    pub big_components: usize,
}

/// For every good k-cluster of `field`, counts the ω-components of size at
/// least `k` inside the union of its blocks; anything other than one is a
/// violation.
pub fn check_single_giant(g: &Graph, grid: &BlockGrid, field: &CoarseField, omega: &BondConfig) -> Vec<ObservationViolation> {
    let labels = star_clusters(grid, field, Adjacency::K, 1);
    let count = cluster_sizes(&labels).len();
    let mut by_cluster: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (c, &l) in labels.iter().enumerate() {
        if l != u32::MAX {
            by_cluster[l as usize].push(c);
        }
    }
    let mut owner = vec![u32::MAX; g.vertex_count()];
    let mut local = vec![0u32; g.vertex_count()];
    let mut out = Vec::new();
    for (l, centers) in by_cluster.iter().enumerate() {
        let mut count = 0usize;
        for &c in centers {
            for &v in grid.block_vertices(c) {
                if owner[v as usize] != l as u32 {
                    owner[v as usize] = l as u32;
                    local[v as usize] = count as u32;
                    count += 1;
                }
            }
        }
        let mut uf = UnionFind::new(count);
        for &c in centers {
            for e in grid.block_edges(c) {
                if omega.is_open(e as usize) {
                    let (a, b) = g.edge(e as usize);
                    uf.union(local[a] as usize, local[b] as usize);
                }
            }
        }
        let big = (0..count).filter(|&v| uf.find(v) == v && uf.set_size(v) >= grid.k).count();
        if big != 1 {
            out.push(ObservationViolation { cluster_size: centers.len(), big_components: big });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_box, build_torus};
    use rand::Rng as _;

    fn field_from(grid: &BlockGrid, values: Vec<u8>) -> CoarseField {
        field_shell(grid, FieldSource::Single, values)
    }

    #[test]
    fn k_good_examples() {
        let b = build_box(2, 2).unwrap();
        let m = b.edge_count();
        assert!(k_good(&b, &BondConfig::full(m), 2).unwrap());
        assert!(!k_good(&b, &BondConfig::empty(m), 2).unwrap());
        // two horizontal spanning paths at rows y=-2 and y=2
        let mut omega = BondConfig::empty(m);
        for (e, ed) in b.edges().iter().enumerate() {
            let (p, q) = (b.coords(ed[0] as usize).unwrap(), b.coords(ed[1] as usize).unwrap());
            let horizontal = p[1] == q[1];
            if horizontal && p[1].abs() == 2 {
                omega.set(e, true);
            }
        }
        assert!(!k_good(&b, &omega, 2).unwrap());
    }

    #[test]
    fn very_good_examples() {
        let b = build_box(2, 1).unwrap();
        let full = BondConfig::full(12);
        assert!(very_good(&b, &full, &full, 1).unwrap());
        let empty = BondConfig::empty(12);
        assert!(!very_good(&b, &empty, &empty, 1).unwrap());
        let mut one_off = full.clone();
        one_off.set(5, false);
        assert!(k_good(&b, &one_off, 1).unwrap());
        assert!(!very_good(&b, &full, &one_off, 1).unwrap());
    }

    #[test]
    fn grid_covers_and_overlaps() {
        for (g, k) in [(build_torus(2, 12).unwrap(), 3), (build_box(2, 7).unwrap(), 3), (build_box(2, 6).unwrap(), 2)] {
            let grid = BlockGrid::new(&g, k).unwrap();
            let mut cover = vec![0; g.vertex_count()];
            for c in 0..grid.center_count() {
                for &v in grid.block_vertices(c) {
                    cover[v as usize] += 1;
                }
            }
            assert!(cover.iter().all(|&x| x >= 1));
        }
        let g = build_torus(2, 12).unwrap();
        let grid = BlockGrid::new(&g, 3).unwrap();
        let a: std::collections::HashSet<_> = grid.block_vertices(0).iter().collect();
        let w = grid.neighbors(0, Adjacency::K)[0];
        let shared = grid.block_vertices(w).iter().filter(|v| a.contains(v)).count();
        assert!(shared >= (3 + 1) * 7);
        assert!(BlockGrid::new(&build_torus(2, 10).unwrap(), 3).is_err());
    }

    #[test]
    fn clamped_box_centers() {
        let g = build_box(2, 7).unwrap();
        let grid = BlockGrid::new(&g, 3).unwrap();
        assert_eq!(grid.axis, vec![-7, -6, -3, 0, 3, 6, 7]);
    }

    #[test]
    fn field_examples() {
        let g = build_torus(2, 12).unwrap();
        let grid = BlockGrid::new(&g, 2).unwrap();
        let full = coarse_field(&grid, &BondConfig::full(g.edge_count()));
        assert!(full.values.iter().all(|&v| v == 1));
        let empty = coarse_field(&grid, &BondConfig::empty(g.edge_count()));
        assert!(empty.values.iter().all(|&v| v == 0));
        // isolate the vertex at (5,5): its blocks lose a face-spanning
        // cluster only if it sits on a face; it always forms a second
        // cluster of size 1 < k, so use k=1 for a clean defect
        let grid1 = BlockGrid::new(&g, 1).unwrap();
        let v = g.index_of(&[5, 5]).unwrap();
        let mut omega = BondConfig::full(g.edge_count());
        for &e in g.incident_edges(v) {
            omega.set(e as usize, false);
        }
        let f = coarse_field(&grid1, &omega);
        let bad: Vec<usize> = (0..grid1.center_count()).filter(|&c| !f.get(c)).collect();
        let expected: Vec<usize> = (0..grid1.center_count())
            .filter(|&c| grid1.block_vertices(c).contains(&(v as u32)))
            .collect();
        assert_eq!(bad, expected);
        assert_eq!(bad.len(), 9);
        let f2 = CoarseField::from_text(&f.to_text()).unwrap();
        assert_eq!(f2.values, f.values);
    }

    #[test]
    fn pair_field_marks_differences() {
        let g = build_torus(2, 12).unwrap();
        let grid = BlockGrid::new(&g, 2).unwrap();
        let full = BondConfig::full(g.edge_count());
        let mut other = full.clone();
        other.set(0, false);
        let f = coarse_field_pair(&grid, &full, &other);
        let (a, b) = g.edge(0);
        for c in 0..grid.center_count() {
            let bv = grid.block_vertices(c);
            let contains_edge = grid.block_edges(c).any(|e| e == 0);
            assert_eq!(f.get(c), !contains_edge, "center {c} {a} {b} {:?}", bv.len());
        }
    }

    #[test]
    fn cluster_examples() {
        let g = build_box(2, 3).unwrap();
        let grid = BlockGrid::new(&g, 2).unwrap(); // axis -3,-2,0,2,3 -> 5x5
        assert_eq!(grid.centers_per_axis(), 5);
        let ones = field_from(&grid, vec![1; 25]);
        assert!(star_clusters(&grid, &ones, Adjacency::K, 1).iter().all(|&l| l == 0));
        let mut diag = vec![0; 25];
        diag[grid.center_from_multi(&[1, 1])] = 1;
        diag[grid.center_from_multi(&[2, 2])] = 1;
        let f = field_from(&grid, diag);
        let star = star_clusters(&grid, &f, Adjacency::KStar, 1);
        let plain = star_clusters(&grid, &f, Adjacency::K, 1);
        assert_eq!(cluster_sizes(&star), vec![2]);
        assert_eq!(cluster_sizes(&plain), vec![1, 1]);
        let g4 = build_torus(2, 8).unwrap();
        let grid4 = BlockGrid::new(&g4, 2).unwrap(); // 4x4 centers
        let checker: Vec<u8> = (0..16).map(|c| ((c / 4 + c % 4) % 2 == 0) as u8).collect();
        let f = field_from(&grid4, checker);
        assert_eq!(cluster_sizes(&star_clusters(&grid4, &f, Adjacency::KStar, 1)), vec![8]);
        assert_eq!(cluster_sizes(&star_clusters(&grid4, &f, Adjacency::K, 1)), vec![1; 8]);
    }

    #[test]
    fn surface_examples() {
        let g = build_box(2, 6).unwrap();
        let grid = BlockGrid::new(&g, 1).unwrap(); // 13x13 centers
        let n = grid.center_count();
        let s = find_separating_surface(&grid, &g, &field_from(&grid, vec![1; n]), 2).unwrap();
        assert!(s.exists);
        assert_eq!(s.gamma_k.len(), grid.outer_ring().len());
        assert!(s.ext_k.is_empty() && s.ext.is_empty());
        // closed column crossing the annulus
        let mut v = vec![1; n];
        for y in 0..13 {
            if y <= 6 {
                v[grid.center_from_multi(&[6, y])] = 0;
            }
        }
        let s = find_separating_surface(&grid, &g, &field_from(&grid, v), 2).unwrap();
        assert!(!s.exists);
        assert!(!s.witness.is_empty());
        // single closed center in the annulus
        let mut v = vec![1; n];
        let hole = grid.center_from_multi(&[6, 10]);
        v[hole] = 0;
        let s = find_separating_surface(&grid, &g, &field_from(&grid, v), 2).unwrap();
        assert!(s.exists);
        assert!(s.int_k.contains(&(hole as u32)));
        for c in grid.centers_within(2) {
            assert!(s.int_k.contains(&(c as u32)));
        }
        assert!(surface_separates(&grid, &s));
        assert!(find_separating_surface(&grid, &g, &field_from(&grid, vec![1; n]), 5).is_err());
    }

    /// Independent check: depth-first search over closed star-paths from the
    /// ring, and separation of Int from Ext by the surface.
    #[test]
    fn surface_matches_path_search() {
        let mut rng = crate::seed::rng_from_seed(17);
        for (m, l) in [(2usize, 0usize), (3, 1)] {
            let g = build_box(2, m).unwrap();
            let grid = BlockGrid::new(&g, 1).unwrap();
            let n = grid.center_count();
            for trial in 0..10_000 {
                let density = [0.1, 0.3, 0.5][trial % 3];
                let v: Vec<u8> = (0..n).map(|_| (rng.gen::<f64>() >= density) as u8).collect();
                let f = field_from(&grid, v.clone());
                let s = find_separating_surface(&grid, &g, &f, l).unwrap();
                let mut seen = vec![false; n];
                let mut stack: Vec<usize> = grid.outer_ring().into_iter().filter(|&c| v[c] == 0).collect();
                let mut crossing = false;
                while let Some(c) = stack.pop() {
                    if seen[c] {
                        continue;
                    }
                    seen[c] = true;
                    if grid.center_norm(c) <= (l + 1) as i32 {
                        crossing = true;
                    }
                    stack.extend(grid.neighbors(c, Adjacency::KStar).into_iter().filter(|&w| v[w] == 0 && !seen[w]));
                }
                assert_eq!(s.exists, !crossing);
                if s.exists {
                    assert!(surface_separates(&grid, &s));
                    assert!(s.gamma_k.iter().all(|&c| v[c as usize] == 1));
                    assert_eq!(s.gamma_k.len() + s.int_k.len() + s.ext_k.len(), n);
                    for c in grid.centers_within(l as i32) {
                        assert!(s.int_k.contains(&(c as u32)));
                    }
                }
            }
        }
    }

    #[test]
    fn e_ma_examples() {
        let g = build_box(2, 8).unwrap();
        let grid = BlockGrid::new(&g, 2).unwrap();
        let origin = [g.index_of(&[0, 0]).unwrap() as u32];
        let m = g.edge_count();
        assert!(classify_e_ma(&g, &grid, &BondConfig::full(m), &origin).unwrap());
        assert!(!classify_e_ma(&g, &grid, &BondConfig::empty(m), &origin).unwrap());
        let mut omega = BondConfig::full(m);
        for &b in g.inner_boundary() {
            for &e in g.incident_edges(b as usize) {
                omega.set(e as usize, false);
            }
        }
        assert!(!classify_e_ma(&g, &grid, &omega, &origin).unwrap());
    }

    #[test]
    fn e_theta_examples() {
        let g = build_torus(2, 16).unwrap();
        let grid = BlockGrid::new(&g, 2).unwrap();
        let a = [0u32];
        let m = g.edge_count();
        assert!(classify_e_m_theta(&grid, &BondConfig::full(m), Some(&a), 1.0).unwrap());
        assert!(!classify_e_m_theta(&grid, &BondConfig::empty(m), Some(&a), 0.5).unwrap());
        let grid1 = BlockGrid::new(&g, 1).unwrap();
        let v = g.index_of(&[5, 5]).unwrap();
        let mut omega = BondConfig::full(m);
        for &e in g.incident_edges(v) {
            omega.set(e as usize, false);
        }
        assert!(!classify_e_m_theta(&grid1, &omega, Some(&a), 1.0).unwrap());
        assert!(classify_e_m_theta(&grid1, &omega, None, 0.9).unwrap());
    }

    #[test]
    fn single_giant_on_full_and_random() {
        let g = build_torus(2, 16).unwrap();
        let grid = BlockGrid::new(&g, 2).unwrap();
        let full = BondConfig::full(g.edge_count());
        assert!(check_single_giant(&g, &grid, &coarse_field(&grid, &full), &full).is_empty());
        let mut rng = crate::seed::rng_from_seed(3);
        for _ in 0..200 {
            let omega = BondConfig::from_bits((0..g.edge_count()).map(|_| rng.gen::<f64>() < 0.75).collect());
            let f = coarse_field(&grid, &omega);
            assert!(check_single_giant(&g, &grid, &f, &omega).is_empty());
        }
    }
}
