//! Continuous-time heat-bath Glauber dynamics driven by a shared event stream.
//!
//! Per-vertex rate-1 Poisson clocks are realized by superposition: one global
//! exponential clock of rate `N` plus a uniformly chosen vertex. Every event
//! carries its own `Unif[0,1]` threshold, so any number of chains can consume
//! the same stream (the grand coupling).

use rand::Rng as _;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Graph, GraphKind};
use crate::ising::{IsingSystem, PhaseTag, SpinConfig};
use crate::seed::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Absolute simulated time of the event.
    pub time: f64,
    /// Time since the previous event.
    pub dt: f64,
    pub vertex: u32,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct EventStream {
    seed: u64,
    rng: Rng,
    n: usize,
    clock: f64,
    exp: Exp<f64>,
    buffered: Option<Event>,
}

impl EventStream {
    pub fn new(seed: u64, n: usize) -> Self {
        assert!(n > 0, "event stream over an empty vertex set");
        Self {
            seed,
            rng: rng_from_seed(seed),
            n,
            clock: 0.0,
            exp: Exp::new(n as f64).expect("positive rate"),
            buffered: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn draw(&mut self) -> Event {
        let dt = self.exp.sample(&mut self.rng);
        let vertex = self.rng.gen_range(0..self.n) as u32;
        let threshold = self.rng.gen::<f64>();
        self.clock += dt;
        Event { time: self.clock, dt, vertex, threshold }
    }

    pub fn peek(&mut self) -> Event {
        if self.buffered.is_none() {
            self.buffered = Some(self.draw());
        }
        self.buffered.unwrap()
    }

    pub fn next_event(&mut self) -> Event {
        self.buffered.take().unwrap_or_else(|| self.draw())
    }

    /// Next event if it occurs at or before `t_max`.
    pub fn next_before(&mut self, t_max: f64) -> Option<Event> {
        if self.peek().time <= t_max {
            Some(self.next_event())
        } else {
            None
        }
    }
}

impl Iterator for EventStream {
    type Item = Event;
    fn next(&mut self) -> Option<Event> {
        Some(self.next_event())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainMode {
    Plain,
    RestrictedPlus,
    RestrictedMinus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub sigma: SpinConfig,
    pub t: f64,
    pub mode: ChainMode,
    pub events: u64,
}

impl ChainState {
    pub fn new(sigma: SpinConfig, mode: ChainMode) -> Self {
        Self { sigma, t: 0.0, mode, events: 0 }
    }
}

/// Applies one event. Returns true when the restricted rule overrode the
/// plain heat-bath outcome.
#[inline]
pub fn apply_event(sys: &IsingSystem<'_>, state: &mut ChainState, ev: &Event) -> bool {
    let v = ev.vertex as usize;
    let p = sys.prob_plus(state.sigma.spins(), v);
    let proposed: i8 = if ev.threshold <= p { 1 } else { -1 };
    state.t = ev.time;
    state.events += 1;
    let old = state.sigma.get(v);
    let m_new = state.sigma.magnetization() + (proposed - old) as i64;
    let (value, forced) = match state.mode {
        ChainMode::Plain => (proposed, false),
        ChainMode::RestrictedPlus if m_new < 0 => (1, true),
        ChainMode::RestrictedMinus if m_new > 0 => (-1, true),
        _ => (proposed, false),
    };
    state.sigma.set(v, value);
    forced
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "vertex")]
pub enum Observable {
    Magnetization,
    AbsMagnetizationDensity,
    Energy,
    Spin(u32),
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Magnetization => "magnetization".into(),
            Observable::AbsMagnetizationDensity => "abs_magnetization_density".into(),
            Observable::Energy => "energy".into(),
            Observable::Spin(v) => format!("spin_{v}"),
        }
    }

    pub fn evaluate(&self, sys: &IsingSystem<'_>, sigma: &SpinConfig) -> f64 {
        match self {
            Observable::Magnetization => sigma.magnetization() as f64,
            Observable::AbsMagnetizationDensity => {
                sigma.magnetization().unsigned_abs() as f64 / sigma.len() as f64
            }
            Observable::Energy => sys.cut_size(sigma) as f64,
            Observable::Spin(v) => sigma.get(*v as usize) as f64,
        }
    }
}

/// Probes at `0, interval, 2·interval, ... ≤ t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSchedule {
    pub interval: f64,
    pub observables: Vec<Observable>,
}

impl ProbeSchedule {
    pub fn none() -> Self {
        Self { interval: f64::INFINITY, observables: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub t: f64,
    pub observable: Observable,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub probes: Vec<ProbeRecord>,
    pub events: u64,
    pub restricted_fires: u64,
    pub first_restricted_fire: Option<f64>,
}

impl Trajectory {
    /// CSV rows `seed,t,observable,value`.
    pub fn to_csv_rows(&self, seed: u64) -> String {
        let mut s = String::new();
        for p in &self.probes {
            s.push_str(&format!("{seed},{},{},{}\n", p.t, p.observable.name(), p.value));
        }
        s
    }

    pub fn series(&self, obs: Observable) -> Vec<(f64, f64)> {
        self.probes.iter().filter(|p| p.observable == obs).map(|p| (p.t, p.value)).collect()
    }
}

fn record(sys: &IsingSystem<'_>, sigma: &SpinConfig, t: f64, probes: &ProbeSchedule, out: &mut Trajectory) {
    for o in &probes.observables {
        out.probes.push(ProbeRecord { t, observable: *o, value: o.evaluate(sys, sigma) });
    }
}

/// Runs the chain until simulated time `t_max`, probing on the schedule.
pub fn run(
    sys: &IsingSystem<'_>,
    state: &mut ChainState,
    stream: &mut EventStream,
    t_max: f64,
    probes: &ProbeSchedule,
) -> Trajectory {
    let mut out = Trajectory::default();
    let probing = !probes.observables.is_empty() && probes.interval.is_finite() && probes.interval > 0.0;
    let mut k = 0u64;
    let mut next_probe = if probing { state.t } else { f64::INFINITY };
    let start = state.t;
    loop {
        let ev_time = stream.peek().time;
        while probing && next_probe <= t_max && next_probe < ev_time {
            record(sys, &state.sigma, next_probe, probes, &mut out);
            k += 1;
            next_probe = start + k as f64 * probes.interval;
        }
        if ev_time > t_max {
            break;
        }
        let ev = stream.next_event();
        if apply_event(sys, state, &ev) {
            out.restricted_fires += 1;
            out.first_restricted_fire.get_or_insert(ev.time);
        }
        out.events += 1;
    }
    state.t = state.t.max(t_max);
    out
}

/// Chains advanced in lockstep by one shared stream.
#[derive(Debug)]
pub struct CouplingBundle<'a> {
    pub stream: EventStream,
    systems: Vec<&'a IsingSystem<'a>>,
    pub chains: Vec<ChainState>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CouplingSummary {
    pub events: u64,
    pub order_violations: u64,
    /// First event time at which the member configurations stopped being
    /// identical, if they started identical.
    pub first_divergence: Option<f64>,
    pub first_restricted_fire: Vec<Option<f64>>,
}

impl<'a> CouplingBundle<'a> {
    pub fn new(stream: EventStream) -> Self {
        Self { stream, systems: Vec::new(), chains: Vec::new() }
    }

    pub fn push(&mut self, sys: &'a IsingSystem<'a>, state: ChainState) {
        self.systems.push(sys);
        self.chains.push(state);
    }

    /// Runs every member to `t_max` on the shared stream and counts breaks of
    /// the initial pointwise order among plain chains.
    pub fn grand_coupling_run(&mut self, t_max: f64) -> Result<CouplingSummary> {
        let Some(first) = self.systems.first() else {
            return Ok(CouplingSummary::default());
        };
        if self.systems.iter().any(|s| !s.same_model(first)) {
            return Err(Error::MixedBundle);
        }
        let plain: Vec<usize> =
            (0..self.chains.len()).filter(|&i| self.chains[i].mode == ChainMode::Plain).collect();
        let mut ordered = Vec::new();
        for &i in &plain {
            for &j in &plain {
                if i != j && self.chains[i].sigma.dominates(&self.chains[j].sigma) {
                    ordered.push((i, j));
                }
            }
        }
        let mut identical = self.chains.windows(2).all(|w| w[0].sigma == w[1].sigma);
        let mut summary = CouplingSummary {
            first_restricted_fire: vec![None; self.chains.len()],
            ..Default::default()
        };
        let sys = *first;
        while let Some(ev) = self.stream.next_before(t_max) {
            let v = ev.vertex as usize;
            for (c, chain) in self.chains.iter_mut().enumerate() {
                if apply_event(sys, chain, &ev) {
                    summary.first_restricted_fire[c].get_or_insert(ev.time);
                }
            }
            for &(i, j) in &ordered {
                if self.chains[i].sigma.get(v) < self.chains[j].sigma.get(v) {
                    summary.order_violations += 1;
                }
            }
            if identical {
                let s0 = self.chains[0].sigma.get(v);
                if self.chains.iter().any(|c| c.sigma.get(v) != s0) {
                    identical = false;
                    summary.first_divergence = Some(ev.time);
                }
            }
            summary.events += 1;
        }
        for c in &mut self.chains {
            c.t = c.t.max(t_max);
        }
        Ok(summary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HitResult {
    Hit(f64),
    NotHit,
}

/// First simulated time the configuration lies in `target`, or `NotHit` once
/// `t_cap` is reached.
pub fn hitting_time(
    sys: &IsingSystem<'_>,
    state: &mut ChainState,
    stream: &mut EventStream,
    target: PhaseTag,
    t_cap: f64,
) -> HitResult {
    if target.contains(state.sigma.magnetization()) {
        return HitResult::Hit(state.t);
    }
    while let Some(ev) = stream.next_before(t_cap) {
        apply_event(sys, state, &ev);
        if target.contains(state.sigma.magnetization()) {
            return HitResult::Hit(ev.time);
        }
    }
    state.t = t_cap;
    HitResult::NotHit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitDistribution {
    AllPlus,
    AllMinus,
    /// All-plus or all-minus with probability ½ each.
    PlusMinus,
    Explicit { spins: Vec<i8> },
    /// `-1` on a slab `0 ≤ x_0 < width·side` along the first coordinate.
    Strip { width_fraction: f64 },
    Checkerboard,
}

impl InitDistribution {
    pub const DEFAULT_STRIP_WIDTH: f64 = 0.25;

    pub fn label(&self) -> &'static str {
        match self {
            InitDistribution::AllPlus => "all-plus",
            InitDistribution::AllMinus => "all-minus",
            InitDistribution::PlusMinus => "plus-minus",
            InitDistribution::Explicit { .. } => "explicit",
            InitDistribution::Strip { .. } => "strip",
            InitDistribution::Checkerboard => "checkerboard",
        }
    }

    /// Draws the initial configuration. Only `PlusMinus` uses the coin
    /// stream; all other variants are deterministic.
    pub fn sample(&self, g: &Graph, coin: &mut Rng) -> Result<SpinConfig> {
        let n = g.vertex_count();
        Ok(match self {
            InitDistribution::AllPlus => SpinConfig::all_plus(n),
            InitDistribution::AllMinus => SpinConfig::all_minus(n),
            InitDistribution::PlusMinus => {
                if coin.gen::<bool>() {
                    SpinConfig::all_plus(n)
                } else {
                    SpinConfig::all_minus(n)
                }
            }
            InitDistribution::Explicit { spins } => {
                if spins.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "explicit init has {} spins, graph has {n}",
                        spins.len()
                    )));
                }
                SpinConfig::from_spins(spins.clone())?
            }
            InitDistribution::Strip { width_fraction } => {
                if !(0.0..=1.0).contains(width_fraction) {
                    return Err(Error::InvalidParameter(format!("strip width {width_fraction}")));
                }
                let spins = (0..n)
                    .map(|v| {
                        let inside = match (g.kind, g.coords(v)) {
                            (GraphKind::Torus, Some(x)) => {
                                (x[0] as f64) < (width_fraction * g.side as f64).round()
                            }
                            (GraphKind::Box, Some(x)) => {
                                ((x[0] + g.side as i32) as f64)
                                    < (width_fraction * (2 * g.side + 1) as f64).round()
                            }
                            _ => (v as f64) < (width_fraction * n as f64).round(),
                        };
                        if inside { -1 } else { 1 }
                    })
                    .collect();
                SpinConfig::from_spins(spins)?
            }
            InitDistribution::Checkerboard => {
                let spins = (0..n)
                    .map(|v| {
                        let parity = match g.coords(v) {
                            Some(x) => x.iter().map(|&c| c.rem_euclid(2)).sum::<i32>() % 2,
                            None => (v % 2) as i32,
                        };
                        if parity == 0 { 1 } else { -1 }
                    })
                    .collect();
                SpinConfig::from_spins(spins)?
            }
        })
    }
}

/// Disjoint sub-streams of a replica: the ν± coin, the initial
/// configuration and the update events never share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaSeeds {
    pub coin: u64,
    pub updates: u64,
    pub aux: u64,
}

impl ReplicaSeeds {
    pub fn new(master: u64, replica: usize) -> Self {
        let lbl = |p: &str| derive_seed(master, &crate::seed::replica_label(replica, p));
        Self { coin: lbl("coin"), updates: lbl("updates"), aux: lbl("aux") }
    }
}

/// One replica: draw the initialization, then run plain or restricted
/// dynamics to `t_max`.
pub fn run_replica(
    sys: &IsingSystem<'_>,
    init: &InitDistribution,
    mode: ChainMode,
    seeds: ReplicaSeeds,
    t_max: f64,
    probes: &ProbeSchedule,
) -> Result<(ChainState, Trajectory)> {
    let mut coin = rng_from_seed(seeds.coin);
    let sigma = init.sample(sys.graph, &mut coin)?;
    let mut state = ChainState::new(sigma, mode);
    let mut stream = EventStream::new(seeds.updates, sys.vertex_count());
    let traj = run(sys, &mut state, &mut stream, t_max, probes);
    Ok((state, traj))
}
