//! Outside-in revealing coupling of two random-cluster measures on a box
//! with different boundary partitions.
//!
//! Blocks are revealed from the outer ring inward. Each step samples the
//! block's unrevealed edges for both measures from their exact conditional
//! laws under a monotone coupling; very good blocks close off the frontier,
//! others open their star-neighbours. Once the frontier is empty the rest is
//! sampled once and copied to both sides.

use std::collections::VecDeque;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::coarse::{block_very_good, coarse_field_pair, find_separating_surface, Adjacency, BlockGrid, SurfaceResult};
use crate::error::{Error, Result};
use crate::geometry::{Graph, GraphKind};
use crate::random_cluster::{BondConfig, Connectivity, RcBoundaryPartition, RcParams};
use crate::seed::Rng;
use crate::unionfind::UnionFind;

pub const ENUMERATION_CAP: usize = 20;
/// Largest CFTP horizon, in sweeps of the unrevealed edge set.
pub const CFTP_MAX_SWEEPS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConditionalSampler {
    /// Enumeration up to [`ENUMERATION_CAP`] edges, coupled CFTP above.
    Exact,
    /// Single-bond heat bath from the all-open state; approximate.
    Mcmc { burn_in_sweeps: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealChecks {
    pub interior_equal: bool,
    pub partitions_equal: bool,
}

impl RevealChecks {
    pub fn holds(&self) -> bool {
        self.interior_equal && self.partitions_equal
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RevealOutcome {
    pub omega: BondConfig,
    pub omega_prime: BondConfig,
    pub surface: SurfaceResult,
    pub success: bool,
    pub processed: Vec<u32>,
    pub steps: usize,
    /// Largest CFTP horizon used, in sweeps.
    pub max_cftp_sweeps: usize,
    /// True when any conditional draw came from the approximate sampler.
    pub approximate: bool,
    pub checks: Option<RevealChecks>,
}

struct Side<'a> {
    xi: &'a RcBoundaryPartition,
    conn: Connectivity,
}

/// Draws the unrevealed edges `u` for each side given its current
/// configuration (revealed entries fixed). Sides are driven by shared
/// randomness so that the draws are monotonically coupled.
struct PairSampler<'a> {
    g: &'a Graph,
    rc: RcParams,
    sides: Vec<Side<'a>>,
    sampler: ConditionalSampler,
    max_sweeps_used: usize,
    approximate: bool,
}

impl<'a> PairSampler<'a> {
    fn new(g: &'a Graph, rc: RcParams, xis: &[&'a RcBoundaryPartition], sampler: ConditionalSampler) -> Self {
        let sides = xis.iter().map(|&xi| Side { xi, conn: Connectivity::new(g, xi) }).collect();
        Self { g, rc, sides, sampler, max_sweeps_used: 0, approximate: false }
    }

    /// Samples `target ⊆ u` on every side and writes the values into
    /// `configs`. When `all` is set, the whole of `u` is written.
    fn sample(&mut self, configs: &mut [BondConfig], u: &[u32], target: &[u32], all: bool, rng: &mut Rng) -> Result<()> {
        if u.is_empty() {
            return Ok(());
        }
        match self.sampler {
            ConditionalSampler::Exact if u.len() <= ENUMERATION_CAP => self.enumerate(configs, u, target, all, rng),
            ConditionalSampler::Exact => {
                let out = self.cftp(configs, u, rng)?;
                write_back(configs, &out, if all { u } else { target });
                Ok(())
            }
            ConditionalSampler::Mcmc { burn_in_sweeps } => {
                self.approximate = true;
                let out = self.mcmc(configs, u, burn_in_sweeps.max(1), rng);
                write_back(configs, &out, if all { u } else { target });
                Ok(())
            }
        }
    }

    fn enumerate(&mut self, configs: &mut [BondConfig], u: &[u32], target: &[u32], all: bool, rng: &mut Rng) -> Result<()> {
        let weights: Vec<Vec<f64>> = self
            .sides
            .iter()
            .zip(configs.iter())
            .map(|(s, cfg)| enumeration_weights(self.g, &self.rc, s.xi, cfg, u))
            .collect();
        let pos: Vec<usize> = if all {
            (0..u.len()).collect()
        } else {
            target.iter().map(|e| u.iter().position(|x| x == e).expect("target ⊆ unrevealed")).collect()
        };
        let mut fixed_mask = 0usize;
        let mut fixed_vals: Vec<usize> = vec![0; configs.len()];
        for &i in &pos {
            let coin: f64 = rng.gen();
            let bit = 1usize << i;
            for (s, w) in weights.iter().enumerate() {
                let (mut on, mut tot) = (0.0, 0.0);
                for (x, &wx) in w.iter().enumerate() {
                    if x & fixed_mask == fixed_vals[s] {
                        tot += wx;
                        if x & bit != 0 {
                            on += wx;
                        }
                    }
                }
                if !(tot > 0.0) {
                    return Err(Error::SamplerFailure("conditional law has no mass".into()));
                }
                if coin <= on / tot {
                    fixed_vals[s] |= bit;
                }
            }
            fixed_mask |= bit;
        }
        for (s, cfg) in configs.iter_mut().enumerate() {
            for &i in &pos {
                cfg.set(u[i] as usize, fixed_vals[s] >> i & 1 == 1);
            }
        }
        Ok(())
    }

    fn heat_bath(&mut self, side: usize, cfg: &mut BondConfig, e: usize, coin: f64) {
        let (a, b) = self.g.edge(e);
        let p = if self.sides[side].conn.connected_without(self.g, cfg, a, b, e) {
            self.rc.p
        } else {
            self.rc.isolated_open_prob()
        };
        cfg.set(e, coin <= p);
    }

    fn cftp(&mut self, configs: &[BondConfig], u: &[u32], rng: &mut Rng) -> Result<Vec<BondConfig>> {
        let mut moves: Vec<(u32, f64)> = Vec::new();
        let mut sweeps = 1usize;
        loop {
            let horizon = sweeps * u.len();
            while moves.len() < horizon {
                moves.push((u[rng.gen_range(0..u.len())], rng.gen()));
            }
            let mut tops: Vec<BondConfig> = configs.to_vec();
            let mut bottoms: Vec<BondConfig> = configs.to_vec();
            for s in 0..configs.len() {
                for &e in u {
                    tops[s].set(e as usize, true);
                    bottoms[s].set(e as usize, false);
                }
            }
            // move i is applied at time -(i+1)
            for i in (0..horizon).rev() {
                let (e, coin) = moves[i];
                for s in 0..configs.len() {
                    self.heat_bath(s, &mut tops[s], e as usize, coin);
                    self.heat_bath(s, &mut bottoms[s], e as usize, coin);
                }
            }
            let coalesced =
                tops.iter().zip(&bottoms).all(|(t, b)| u.iter().all(|&e| t.is_open(e as usize) == b.is_open(e as usize)));
            if coalesced {
                self.max_sweeps_used = self.max_sweeps_used.max(sweeps);
                return Ok(tops);
            }
            if sweeps >= CFTP_MAX_SWEEPS {
                return Err(Error::SamplerFailure(format!("no coalescence after {sweeps} sweeps")));
            }
            sweeps *= 2;
        }
    }

    fn mcmc(&mut self, configs: &[BondConfig], u: &[u32], burn_in_sweeps: usize, rng: &mut Rng) -> Vec<BondConfig> {
        let mut states: Vec<BondConfig> = configs.to_vec();
        for st in states.iter_mut() {
            for &e in u {
                st.set(e as usize, true);
            }
        }
        for _ in 0..burn_in_sweeps * u.len() {
            let e = u[rng.gen_range(0..u.len())] as usize;
            let coin: f64 = rng.gen();
            for (s, st) in states.iter_mut().enumerate() {
                self.heat_bath(s, st, e, coin);
            }
        }
        states
    }
}

fn write_back(configs: &mut [BondConfig], sampled: &[BondConfig], edges: &[u32]) {
    for (cfg, src) in configs.iter_mut().zip(sampled) {
        for &e in edges {
            cfg.set(e as usize, src.is_open(e as usize));
        }
    }
}

/// Unnormalized conditional weights over all `2^|u|` assignments of `u`,
/// indexed by bitmask.
fn enumeration_weights(g: &Graph, rc: &RcParams, xi: &RcBoundaryPartition, cfg: &BondConfig, u: &[u32]) -> Vec<f64> {
    let mut free = vec![false; g.edge_count()];
    for &e in u {
        free[e as usize] = true;
    }
    let mut base = UnionFind::new(g.vertex_count());
    for (e, ed) in g.edges().iter().enumerate() {
        if !free[e] && cfg.is_open(e) {
            base.union(ed[0] as usize, ed[1] as usize);
        }
    }
    for b in xi.blocks() {
        for w in b.windows(2) {
            base.union(w[0] as usize, w[1] as usize);
        }
    }
    let base_comps = base.count();
    let mut ids: Vec<usize> = Vec::new();
    let local: Vec<(usize, usize)> = u
        .iter()
        .map(|&e| {
            let (a, b) = g.edge(e as usize);
            let mut id = |r: usize| match ids.iter().position(|&x| x == r) {
                Some(i) => i,
                None => {
                    ids.push(r);
                    ids.len() - 1
                }
            };
            let (ra, rb) = (base.find(a), base.find(b));
            (id(ra), id(rb))
        })
        .collect();
    let (lp, lq, lr) = (rc.p.ln(), rc.q.ln(), (1.0 - rc.p).ln());
    let k = u.len();
    let mut uf = UnionFind::new(ids.len());
    let logs: Vec<f64> = (0..1usize << k)
        .map(|x| {
            uf.reset();
            let mut merges = 0;
            for (i, &(a, b)) in local.iter().enumerate() {
                if x >> i & 1 == 1 && uf.union(a, b) {
                    merges += 1;
                }
            }
            let open = x.count_ones() as f64;
            let term = |n: f64, l: f64| if n == 0.0 { 0.0 } else { n * l };
            term(open, lp) + term(k as f64 - open, lr) + (base_comps - merges) as f64 * lq
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logs.into_iter().map(|l| (l - max).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealConfig {
    pub k: usize,
    /// Success requires a separating surface outside `Λ_l`.
    pub inner_radius: usize,
    pub sampler: ConditionalSampler,
}

/// Runs the revealing coupling on a box graph.
pub fn reveal_coupling(
    g: &Graph,
    rc: RcParams,
    xi: &RcBoundaryPartition,
    xi_prime: &RcBoundaryPartition,
    cfg: RevealConfig,
    rng: &mut Rng,
) -> Result<RevealOutcome> {
    if g.kind != GraphKind::Box {
        return Err(Error::DegenerateGeometry("revealing coupling runs on a box".into()));
    }
    let grid = BlockGrid::new(g, cfg.k)?;
    if cfg.inner_radius + cfg.k >= g.side {
        return Err(Error::MalformedAnnulus { inner: cfg.inner_radius, outer: g.side, k: cfg.k });
    }
    let m = g.edge_count();
    let mut configs = vec![BondConfig::empty(m), BondConfig::empty(m)];
    let mut revealed = vec![false; m];
    let mut sampler = PairSampler::new(g, rc, &[xi, xi_prime], cfg.sampler);
    let n = grid.center_count();
    let mut processed = vec![false; n];
    let mut queued = vec![false; n];
    let mut frontier: VecDeque<usize> = VecDeque::new();
    for c in grid.outer_ring() {
        queued[c] = true;
        frontier.push_back(c);
    }
    let mut order = Vec::new();
    while let Some(c) = frontier.pop_front() {
        processed[c] = true;
        order.push(c as u32);
        let target: Vec<u32> = grid.block_edges(c).filter(|&e| !revealed[e as usize]).collect();
        if !target.is_empty() {
            let u: Vec<u32> = (0..m as u32).filter(|&e| !revealed[e as usize]).collect();
            sampler.sample(&mut configs, &u, &target, false, rng)?;
            for &e in &target {
                revealed[e as usize] = true;
            }
        }
        if !block_very_good(&grid, c, &configs[0], &configs[1]) {
            for w in grid.neighbors(c, Adjacency::KStar) {
                if !processed[w] && !queued[w] {
                    queued[w] = true;
                    frontier.push_back(w);
                }
            }
        }
    }
    let u: Vec<u32> = (0..m as u32).filter(|&e| !revealed[e as usize]).collect();
    if !u.is_empty() {
        let mut single = PairSampler::new(g, rc, &[xi], cfg.sampler);
        let mut one = vec![configs[0].clone()];
        single.sample(&mut one, &u, &u, true, rng)?;
        sampler.approximate |= single.approximate;
        sampler.max_sweeps_used = sampler.max_sweeps_used.max(single.max_sweeps_used);
        for &e in &u {
            let v = one[0].is_open(e as usize);
            configs[0].set(e as usize, v);
            configs[1].set(e as usize, v);
        }
    }
    let field = coarse_field_pair(&grid, &configs[0], &configs[1]);
    let surface = find_separating_surface(&grid, g, &field, cfg.inner_radius)?;
    let success = surface.exists;
    let omega_prime = configs.pop().unwrap();
    let omega = configs.pop().unwrap();
    let checks = success.then(|| RevealChecks {
        interior_equal: interior_equal(g, &surface.int, &omega, &omega_prime),
        partitions_equal: induced_partition(g, &surface.int, &omega, xi)
            == induced_partition(g, &surface.int, &omega_prime, xi_prime),
    });
    if let Some(ch) = &checks {
        if !ch.holds() {
            return Err(Error::SamplerFailure(format!("revealing coupling invariant broken: {ch:?}")));
        }
    }
    Ok(RevealOutcome {
        omega,
        omega_prime,
        surface,
        success,
        processed: order,
        steps: processed.iter().filter(|&&b| b).count(),
        max_cftp_sweeps: sampler.max_sweeps_used,
        approximate: sampler.approximate,
        checks,
    })
}

/// Edges with at least one endpoint in `int`.
fn interior_edges(g: &Graph, int: &[u32]) -> Vec<bool> {
    let mut inside = vec![false; g.vertex_count()];
    for &v in int {
        inside[v as usize] = true;
    }
    g.edges().iter().map(|ed| inside[ed[0] as usize] || inside[ed[1] as usize]).collect()
}

fn interior_equal(g: &Graph, int: &[u32], a: &BondConfig, b: &BondConfig) -> bool {
    interior_edges(g, int).iter().enumerate().all(|(e, &i)| !i || a.is_open(e) == b.is_open(e))
}

/// Partition induced on the outer vertex boundary of `int` by the edges
/// outside the interior together with the ghost wirings of `xi`.
pub fn induced_partition(g: &Graph, int: &[u32], omega: &BondConfig, xi: &RcBoundaryPartition) -> RcBoundaryPartition {
    let in_int = interior_edges(g, int);
    let mut inside = vec![false; g.vertex_count()];
    for &v in int {
        inside[v as usize] = true;
    }
    let mut uf = UnionFind::new(g.vertex_count());
    for (e, ed) in g.edges().iter().enumerate() {
        if !in_int[e] && omega.is_open(e) {
            uf.union(ed[0] as usize, ed[1] as usize);
        }
    }
    for b in xi.blocks() {
        for w in b.windows(2) {
            uf.union(w[0] as usize, w[1] as usize);
        }
    }
    let mut boundary: Vec<u32> = Vec::new();
    for &v in int {
        for &w in g.neighbors(v as usize) {
            if !inside[w as usize] {
                boundary.push(w);
            }
        }
    }
    boundary.sort_unstable();
    boundary.dedup();
    let labels: Vec<u32> = (0..g.vertex_count()).map(|v| uf.find(v) as u32).collect();
    RcBoundaryPartition::from_labels(&boundary, &labels)
}
