//! Exact simulation of the planar branching Brownian motion with an
//! angle-dependent branching rate, its lattice analogue, and the first and
//! second moment identities used to check them.
//!
//! Branching uses thinning: every particle carries an exponential(1) proposal
//! clock (valid because b ≤ 1). At a proposal the particle is moved by an exact
//! Gaussian increment and splits if a uniform falls below b(θ). On a split the
//! parent keeps its lineage id and the new particle gets `child_id(parent, k)`,
//! where `k` is the parent's event counter.
//!
//! All randomness of a lineage is drawn from the Philox stream keyed by
//! `(seed, lineage id)` at a block offset given by the event counter. A lineage
//! therefore sees the same proposals, increments and uniforms whatever the
//! rest of the population does, which is what makes runs at different α
//! couple: raising α only raises b, so it can only add lineages.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::{angle_of, ModelParams};
use crate::numeric::{self, Moments};
use crate::rng::{child_id, mix64, CounterRng};

/// Lineage id of the initial particle.
pub const ROOT_ID: u128 = 1;

/// Default population cap.
pub const DEFAULT_CAP: usize = 2_000_000;

/// Blocks reserved for the draws of one event.
const EVENT_STRIDE: u64 = 1 << 32;

fn event_rng(seed: u64, id: u128, counter: u64) -> CounterRng {
    CounterRng::at_block(seed, id, counter.wrapping_mul(EVENT_STRIDE))
}

/// Seed of replicate `index` derived from a root seed.
pub fn replicate_seed(seed: u64, index: usize) -> u64 {
    mix64(seed ^ mix64(index as u64 ^ 0x5EED))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub lineage_id: u128,
    pub parent: Option<u128>,
    pub birth_time: f64,
    /// Position at `position_time`; advanced lazily.
    pub position: (f64, f64),
    pub position_time: f64,
    pub next_proposal: f64,
    /// Number of random events consumed by this lineage so far.
    pub counter: u64,
    /// Positions at the snapshot times passed so far (only when requested).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub lineage_ids: Vec<u128>,
    pub positions: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub time: f64,
    pub particles: Vec<Particle>,
    pub snapshots: Vec<Snapshot>,
    pub rng_root_seed: u64,
    pub cap: usize,
    /// Time at which the cap was hit, if it was. The run is exact up to then.
    pub truncated_at: Option<f64>,
}

impl Population {
    pub fn is_exact(&self) -> bool {
        self.truncated_at.is_none()
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalStats {
    pub t: f64,
    pub population: usize,
    /// Largest radius M_t.
    pub m_t: f64,
    pub max_x: f64,
    /// Y coordinate of the particle with the largest radius.
    pub argmax_y: f64,
    pub z_t: f64,
    /// Whether max X(s) ≤ √2 s − 1 at every checked time s ∈ [s0, t].
    pub barrier_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub seed: u64,
    /// Times at which statistics are computed; `t_end` is always added.
    pub snapshot_times: Vec<f64>,
    pub cap: usize,
    /// Keep positions and ids at each snapshot.
    pub record_positions: bool,
    /// Keep every particle's positions at past snapshot times.
    pub record_history: bool,
    /// Start s0 of the barrier event; checked at events and snapshots.
    pub barrier_s0: f64,
    /// ϑ₁ entering Z_t.
    pub theta1: f64,
    /// κ entering Z_t.
    pub kappa: f64,
}

impl SimConfig {
    pub fn new(t_end: f64, seed: u64) -> Self {
        SimConfig {
            t_end,
            seed,
            snapshot_times: Vec::new(),
            cap: DEFAULT_CAP,
            record_positions: false,
            record_history: false,
            barrier_s0: 1.0,
            theta1: 0.0,
            kappa: 0.0,
        }
    }

    fn stops(&self) -> Result<Vec<f64>> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::domain(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.cap == 0 {
            return Err(Error::domain("cap must be at least 1"));
        }
        if self
            .snapshot_times
            .iter()
            .any(|s| !(*s > 0.0 && *s <= self.t_end))
        {
            return Err(Error::domain("snapshot times must lie in (0, t_end]"));
        }
        let mut stops = self.snapshot_times.clone();
        stops.push(self.t_end);
        stops.sort_by(|a, b| a.total_cmp(b));
        stops.dedup();
        Ok(stops)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub population: Population,
    pub stats: Vec<ExtremalStats>,
}

fn key(t: f64, id: u128, idx: usize) -> Reverse<(u64, u128, usize)> {
    // Nonnegative floats order like their bit patterns.
    Reverse((t.to_bits(), id, idx))
}

struct Engine<'a> {
    params: &'a ModelParams,
    cfg: &'a SimConfig,
    particles: Vec<Particle>,
    heap: BinaryHeap<Reverse<(u64, u128, usize)>>,
    barrier_ok: bool,
}

impl Engine<'_> {
    fn check_barrier(&mut self, t: f64, x: f64) {
        if t >= self.cfg.barrier_s0 && x > std::f64::consts::SQRT_2 * t - 1.0 {
            self.barrier_ok = false;
        }
    }

    fn spawn(
        &mut self,
        id: u128,
        parent: Option<u128>,
        t: f64,
        position: (f64, f64),
        history: Vec<(f64, f64)>,
    ) {
        let mut rng = event_rng(self.cfg.seed, id, 0);
        let gap: f64 = rng.sample(Exp1);
        let idx = self.particles.len();
        self.particles.push(Particle {
            lineage_id: id,
            parent,
            birth_time: t,
            position,
            position_time: t,
            next_proposal: t + gap,
            counter: 1,
            history,
        });
        self.heap.push(key(t + gap, id, idx));
    }

    /// Process the proposal at the top of the queue. Returns false if the cap was hit.
    fn step(&mut self, idx: usize) -> bool {
        let seed = self.cfg.seed;
        let p = &mut self.particles[idx];
        let tau = p.next_proposal;
        let k = p.counter;
        let mut rng = event_rng(seed, p.lineage_id, k);
        p.counter += 1;
        let sd = (tau - p.position_time).sqrt();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        p.position.0 += sd * z1;
        p.position.1 += sd * z2;
        p.position_time = tau;
        let u: f64 = rng.random();
        let gap: f64 = rng.sample(Exp1);
        p.next_proposal = tau + gap;
        let (id, pos) = (p.lineage_id, p.position);
        let history = if self.cfg.record_history {
            p.history.clone()
        } else {
            Vec::new()
        };
        self.heap.push(key(tau + gap, id, idx));
        self.check_barrier(tau, pos.0);
        if u < self.params.rate_at(pos.0, pos.1) {
            if self.particles.len() >= self.cfg.cap {
                return false;
            }
            self.spawn(child_id(id, k), Some(id), tau, pos, history);
        }
        true
    }

    /// Move every particle to time `t` with fresh increments.
    fn advance_all(&mut self, t: f64) {
        let seed = self.cfg.seed;
        let record = self.cfg.record_history;
        let mut worst = f64::NEG_INFINITY;
        for p in &mut self.particles {
            let dt = t - p.position_time;
            if dt > 0.0 {
                let mut rng = event_rng(seed, p.lineage_id, p.counter);
                p.counter += 1;
                let sd = dt.sqrt();
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                p.position.0 += sd * z1;
                p.position.1 += sd * z2;
                p.position_time = t;
            }
            if record {
                p.history.push(p.position);
            }
            worst = worst.max(p.position.0);
        }
        self.check_barrier(t, worst);
    }

    fn stats(&self, t: f64) -> ExtremalStats {
        let mut m_t = f64::NEG_INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut argmax_y = 0.0;
        let mut z_sum = 0.0;
        let s2 = std::f64::consts::SQRT_2;
        for p in &self.particles {
            let (x, y) = p.position;
            let r = x.hypot(y);
            if r > m_t {
                m_t = r;
                argmax_y = y;
            }
            max_x = max_x.max(x);
            z_sum += (s2 * t - x) * (s2 * (x - s2 * t)).exp();
        }
        let log_prefactor =
            -0.25 * self.cfg.kappa * t.ln() + self.cfg.theta1 * t.powf(1.0 - self.cfg.kappa);
        ExtremalStats {
            t,
            population: self.particles.len(),
            m_t,
            max_x,
            argmax_y,
            z_t: z_sum * log_prefactor.exp(),
            barrier_ok: self.barrier_ok,
        }
    }
}

/// One exact realisation started from a single particle at the origin.
pub fn run_continuous(params: &ModelParams, cfg: &SimConfig) -> Result<RunResult> {
    let stops = cfg.stops()?;
    let mut eng = Engine {
        params,
        cfg,
        particles: Vec::new(),
        heap: BinaryHeap::new(),
        barrier_ok: true,
    };
    eng.spawn(ROOT_ID, None, 0.0, (0.0, 0.0), Vec::new());
    let mut snapshots = Vec::new();
    let mut stats = Vec::new();
    let mut truncated_at = None;
    let mut time = 0.0;
    'outer: for &stop in &stops {
        while let Some(&Reverse((bits, _, idx))) = eng.heap.peek() {
            if f64::from_bits(bits) > stop {
                break;
            }
            eng.heap.pop();
            time = f64::from_bits(bits);
            if !eng.step(idx) {
                truncated_at = Some(time);
                break 'outer;
            }
        }
        eng.advance_all(stop);
        time = stop;
        stats.push(eng.stats(stop));
        if cfg.record_positions {
            snapshots.push(Snapshot {
                time: stop,
                lineage_ids: eng.particles.iter().map(|p| p.lineage_id).collect(),
                positions: eng.particles.iter().map(|p| p.position).collect(),
            });
        }
    }
    Ok(RunResult {
        population: Population {
            time,
            particles: eng.particles,
            snapshots,
            rng_root_seed: cfg.seed,
            cap: cfg.cap,
            truncated_at,
        },
        stats,
    })
}

/// Independent replicates with seeds derived from `cfg.seed`, in replicate order.
pub fn run_replicates(
    params: &ModelParams,
    cfg: &SimConfig,
    n: usize,
    exec: Execution,
) -> Result<Vec<RunResult>> {
    map_indexed(n, exec, |i| {
        let mut c = cfg.clone();
        c.seed = replicate_seed(cfg.seed, i);
        run_continuous(params, &c)
    })
    .into_iter()
    .collect()
}

/// Proposal times and split decisions of a single lineage that never moves
/// away from angle `theta`, drawn exactly as the simulator draws them.
pub fn lineage_events(
    params: &ModelParams,
    seed: u64,
    id: u128,
    theta: f64,
    n: usize,
) -> Vec<(f64, bool)> {
    let mut rng = event_rng(seed, id, 0);
    let mut t: f64 = rng.sample(Exp1);
    let b = params.branching_rate(theta);
    (1..=n as u64)
        .map(|k| {
            let mut rng = event_rng(seed, id, k);
            let _: f64 = rng.sample(StandardNormal);
            let _: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let gap: f64 = rng.sample(Exp1);
            let out = (t, u < b);
            t += gap;
            out
        })
        .collect()
}

/// α-indexed member of a coupled family; `f64::INFINITY` stands for b ≡ 1.
fn member(params: &ModelParams, alpha: f64) -> Result<ModelParams> {
    if alpha.is_infinite() {
        return Ok(ModelParams::homogeneous());
    }
    let mut p = params.clone();
    p.alpha = alpha;
    if matches!(p.rate_family, crate::model::RateFamily::SinPow) {
        p.beta = 2f64.powf(-alpha);
    }
    p.validate()?;
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledRun {
    pub alphas: Vec<f64>,
    pub runs: Vec<RunResult>,
    /// Whether the lineage sets are nested at every snapshot.
    pub nested: bool,
}

/// Runs at several α with shared randomness; checks the inclusion chain.
pub fn run_coupled(
    params: &ModelParams,
    alphas: &[f64],
    cfg: &SimConfig,
    exec: Execution,
) -> Result<CoupledRun> {
    if !params.is_monotone_in_alpha() {
        return Err(Error::config(format!(
            "rate family {} is not monotone in alpha and cannot be coupled",
            params.rate_family.name()
        )));
    }
    if alphas.is_empty() || alphas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config(
            "alphas must be non-empty and strictly increasing",
        ));
    }
    let members: Vec<ModelParams> = alphas
        .iter()
        .map(|a| member(params, *a))
        .collect::<Result<_>>()?;
    let mut c = cfg.clone();
    c.record_positions = true;
    let runs: Vec<RunResult> =
        map_indexed(members.len(), exec, |i| run_continuous(&members[i], &c))
            .into_iter()
            .collect::<Result<_>>()?;
    let nested = lineage_sets_nested(&runs);
    Ok(CoupledRun {
        alphas: alphas.to_vec(),
        runs,
        nested,
    })
}

/// Exact inclusion of lineage-id sets, snapshot by snapshot, along the list.
pub fn lineage_sets_nested(runs: &[RunResult]) -> bool {
    runs.windows(2).all(|w| {
        let (small, large) = (&w[0].population.snapshots, &w[1].population.snapshots);
        small.len() <= large.len()
            && small.iter().zip(large).all(|(a, b)| {
                let set: std::collections::HashSet<u128> = b.lineage_ids.iter().copied().collect();
                a.lineage_ids.iter().all(|id| set.contains(id))
            })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParticle {
    pub lineage_id: u128,
    pub site: (i64, i64),
}

/// Offspring counts for events whose angle fell in one bin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OffspringBin {
    pub lo: f64,
    pub hi: f64,
    pub events: u64,
    pub splits: u64,
    /// Σ b(θ) over the events: the expected number of splits.
    pub expected: f64,
    /// Σ b(1 − b): the variance of the split count.
    pub variance: f64,
}

impl OffspringBin {
    /// Whether the split count lies within the normal-approximation 99% interval.
    pub fn within_99(&self) -> bool {
        (self.splits as f64 - self.expected).abs() <= 2.576 * self.variance.sqrt() + 1e-9
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRun {
    pub generations: usize,
    pub sizes: Vec<usize>,
    pub particles: Vec<LatticeParticle>,
    pub bins: Vec<OffspringBin>,
    pub truncated_at: Option<usize>,
}

const THETA_BINS: usize = 16;

/// The lattice model: each particle has 2 children with probability b(θ) and
/// 1 otherwise; each child moves to one of the 4 neighbours or stays, each with
/// probability 1/5.
pub fn run_discrete(
    params: &ModelParams,
    n_end: usize,
    seed: u64,
    cap: usize,
) -> Result<DiscreteRun> {
    if n_end == 0 {
        return Err(Error::domain("need at least one generation"));
    }
    if cap == 0 {
        return Err(Error::domain("cap must be at least 1"));
    }
    const MOVES: [(i64, i64); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];
    let width = 2.0 * std::f64::consts::PI / THETA_BINS as f64;
    let mut bins: Vec<OffspringBin> = (0..THETA_BINS)
        .map(|i| OffspringBin {
            lo: -std::f64::consts::PI + i as f64 * width,
            hi: -std::f64::consts::PI + (i + 1) as f64 * width,
            ..Default::default()
        })
        .collect();
    let mut pop = vec![LatticeParticle {
        lineage_id: ROOT_ID,
        site: (0, 0),
    }];
    let mut sizes = vec![1];
    let mut truncated_at = None;
    for n in 0..n_end {
        let mut next = Vec::with_capacity(pop.len() * 2);
        for p in &pop {
            let mut rng = event_rng(seed, p.lineage_id, n as u64);
            let theta = angle_of(p.site.0 as f64, p.site.1 as f64);
            let b = params.branching_rate(theta);
            let split = rng.random::<f64>() < b;
            let bin = (((theta + std::f64::consts::PI) / width) as usize).min(THETA_BINS - 1);
            let slot = &mut bins[bin];
            slot.events += 1;
            slot.splits += split as u64;
            slot.expected += b;
            slot.variance += b * (1.0 - b);
            let mut ids = vec![p.lineage_id];
            if split {
                ids.push(child_id(p.lineage_id, n as u64));
            }
            for id in ids {
                let (dx, dy) = MOVES[rng.random_range(0..5)];
                next.push(LatticeParticle {
                    lineage_id: id,
                    site: (p.site.0 + dx, p.site.1 + dy),
                });
            }
        }
        if next.len() > cap {
            truncated_at = Some(n);
            break;
        }
        pop = next;
        sizes.push(pop.len());
    }
    Ok(DiscreteRun {
        generations: sizes.len() - 1,
        sizes,
        particles: pop,
        bins,
        truncated_at,
    })
}

/// Functionals F of a particle's path that the moment checks support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    One,
    Zero,
    /// 1{X_t > x0}.
    XAbove {
        x0: f64,
    },
    /// 1{R_t > r0}.
    RAbove {
        r0: f64,
    },
    /// 1{X_s > x0 for every listed s}, s ≤ t.
    Cylinder {
        times: Vec<f64>,
        x0: f64,
    },
}

impl Functional {
    fn cylinder_times(&self) -> &[f64] {
        match self {
            Functional::Cylinder { times, .. } => times,
            _ => &[],
        }
    }

    /// F from the end point and the positions at the cylinder times.
    fn eval(&self, end: (f64, f64), at_times: &[(f64, f64)]) -> f64 {
        let b = |c: bool| if c { 1.0 } else { 0.0 };
        match self {
            Functional::One => 1.0,
            Functional::Zero => 0.0,
            Functional::XAbove { x0 } => b(end.0 > *x0),
            Functional::RAbove { r0 } => b(end.0.hypot(end.1) > *r0),
            Functional::Cylinder { x0, .. } => b(at_times.iter().all(|p| p.0 > *x0)),
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        if let Functional::Cylinder { times, .. } = self {
            if times.is_empty() || times.iter().any(|s| !(*s > 0.0 && *s <= t)) {
                return Err(Error::config(
                    "cylinder times must be non-empty and lie in (0, t]",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub t: f64,
    pub simulated: f64,
    pub simulated_stderr: f64,
    pub formula: f64,
    pub formula_stderr: f64,
    pub z_score: f64,
    pub n_sim: usize,
    pub n_mc: usize,
}

impl MomentReport {
    fn new(t: f64, sim: Moments, mc: Moments, n_sim: usize, n_mc: usize) -> Self {
        let (a, sa) = (sim.mean(), sim.stderr());
        let (b, sb) = (mc.mean(), mc.stderr());
        let spread = (sa * sa + sb * sb).sqrt();
        let z_score = if spread > 0.0 {
            (a - b) / spread
        } else if a == b {
            0.0
        } else {
            f64::INFINITY
        };
        MomentReport {
            t,
            simulated: a,
            simulated_stderr: sa,
            formula: b,
            formula_stderr: sb,
            z_score,
            n_sim,
            n_mc,
        }
    }
}

/// Grid step of the Brownian paths in the moment formulas.
pub const MOMENT_STEP: f64 = 2e-3;

fn rate_along(params: &ModelParams, path: &[(f64, f64)], dt: f64) -> Vec<f64> {
    // Cumulative ∫ b along the path (trapezoidal); entry k is the integral up to k·dt.
    let mut acc = vec![0.0; path.len()];
    let mut prev = params.rate_at(path[0].0, path[0].1);
    for k in 1..path.len() {
        let next = params.rate_at(path[k].0, path[k].1);
        acc[k] = acc[k - 1] + 0.5 * dt * (prev + next);
        prev = next;
    }
    acc
}

fn brownian_path(
    rng: &mut CounterRng,
    start: (f64, f64),
    steps: usize,
    dt: f64,
    out: &mut Vec<(f64, f64)>,
) {
    let sd = dt.sqrt();
    out.clear();
    out.push(start);
    let mut p = start;
    for _ in 0..steps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        p = (p.0 + sd * z1, p.1 + sd * z2);
        out.push(p);
    }
}

fn grid_for(t: f64) -> (usize, f64) {
    let n = (t / MOMENT_STEP).ceil().max(1.0) as usize;
    (n, t / n as f64)
}

fn sim_config_for(t: f64, seed: u64, f: &[&Functional]) -> SimConfig {
    let mut times: Vec<f64> = f.iter().flat_map(|g| g.cylinder_times().to_vec()).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let mut cfg = SimConfig::new(t, seed);
    cfg.record_history = !times.is_empty();
    cfg.snapshot_times = times;
    cfg
}

/// Positions of a particle at the cylinder times of `f`, given the snapshot times.
fn cylinder_points(
    f: &Functional,
    snapshot_times: &[f64],
    history: &[(f64, f64)],
) -> Vec<(f64, f64)> {
    f.cylinder_times()
        .iter()
        .filter_map(|s| {
            snapshot_times
                .iter()
                .position(|u| u == s)
                .and_then(|i| history.get(i).copied())
        })
        .collect()
}

/// E[Σ_u F(path_u)] from the simulator against E[F(B) exp(∫₀^t b(θ_s) ds)].
pub fn many_to_one_check(
    params: &ModelParams,
    t: f64,
    f: &Functional,
    n_sim: usize,
    n_mc: usize,
    seed: u64,
    exec: Execution,
) -> Result<MomentReport> {
    f.check(t)?;
    if n_sim < 2 || n_mc < 2 {
        return Err(Error::config(
            "need at least two simulator replicates and two Monte Carlo paths",
        ));
    }
    let cfg = sim_config_for(t, seed, &[f]);
    let mut stops = cfg.snapshot_times.clone();
    stops.push(t);
    let sims = map_indexed(n_sim, exec, |i| {
        let mut c = cfg.clone();
        c.seed = replicate_seed(seed, i);
        run_continuous(params, &c).map(|r| {
            r.population
                .particles
                .iter()
                .map(|p| f.eval(p.position, &cylinder_points(f, &stops, &p.history)))
                .sum::<f64>()
        })
    });
    let mut sim = Moments::default();
    for v in sims {
        sim.push(v?);
    }
    let (steps, dt) = grid_for(t);
    let index_of = |s: f64| ((s / dt).round() as usize).min(steps);
    let mc_seed = mix64(seed ^ 0x4D43);
    let parts = map_indexed(n_mc.div_ceil(1024), exec, |c| {
        let mut m = Moments::default();
        let mut path = Vec::new();
        for i in c * 1024..((c + 1) * 1024).min(n_mc) {
            let mut rng = CounterRng::new(mc_seed, i as u128);
            brownian_path(&mut rng, (0.0, 0.0), steps, dt, &mut path);
            let acc = rate_along(params, &path, dt);
            let pts: Vec<(f64, f64)> = f
                .cylinder_times()
                .iter()
                .map(|s| path[index_of(*s)])
                .collect();
            m.push(f.eval(path[steps], &pts) * acc[steps].exp());
        }
        m
    });
    let mut mc = Moments::default();
    for p in &parts {
        mc.merge(p);
    }
    Ok(MomentReport::new(t, sim, mc, n_sim, n_mc))
}

/// E[Σ_{u≠v} F(u)G(v)] from the simulator against the two-spine formula
/// 2∫₀^t E[b(ξ¹_r) e^{∫₀^t b(ξ¹) + ∫_r^t b(ξ²)} F(ξ¹)G(ξ²)] dr.
#[allow(clippy::too_many_arguments)]
pub fn many_to_two_check(
    params: &ModelParams,
    t: f64,
    f: &Functional,
    g: &Functional,
    n_sim: usize,
    n_mc: usize,
    seed: u64,
    exec: Execution,
) -> Result<MomentReport> {
    for h in [f, g] {
        h.check(t)?;
        if !h.cylinder_times().is_empty() {
            return Err(Error::config(
                "the many-to-two check supports end-point functionals only",
            ));
        }
    }
    if n_sim < 2 || n_mc < 2 {
        return Err(Error::config(
            "need at least two simulator replicates and two Monte Carlo paths",
        ));
    }
    let cfg = SimConfig::new(t, seed);
    let sims = map_indexed(n_sim, exec, |i| {
        let mut c = cfg.clone();
        c.seed = replicate_seed(seed, i);
        run_continuous(params, &c).map(|r| {
            let (mut sf, mut sg, mut sfg) = (0.0, 0.0, 0.0);
            for p in &r.population.particles {
                let a = f.eval(p.position, &[]);
                let b = g.eval(p.position, &[]);
                sf += a;
                sg += b;
                sfg += a * b;
            }
            sf * sg - sfg
        })
    });
    let mut sim = Moments::default();
    for v in sims {
        sim.push(v?);
    }
    let (steps, dt) = grid_for(t);
    let mc_seed = mix64(seed ^ 0x4D32);
    let parts = map_indexed(n_mc.div_ceil(1024), exec, |c| {
        let mut m = Moments::default();
        let mut spine = Vec::new();
        let mut branch = Vec::new();
        for i in c * 1024..((c + 1) * 1024).min(n_mc) {
            let mut rng = CounterRng::new(mc_seed, i as u128);
            let j = rng.random_range(0..steps);
            brownian_path(&mut rng, (0.0, 0.0), steps, dt, &mut spine);
            brownian_path(&mut rng, spine[j], steps - j, dt, &mut branch);
            let a1 = rate_along(params, &spine, dt);
            let a2 = rate_along(params, &branch, dt);
            let split = spine[j];
            let weight =
                2.0 * t * params.rate_at(split.0, split.1) * (a1[steps] + a2[steps - j]).exp();
            m.push(weight * f.eval(spine[steps], &[]) * g.eval(branch[steps - j], &[]));
        }
        m
    });
    let mut mc = Moments::default();
    for p in &parts {
        mc.merge(p);
    }
    Ok(MomentReport::new(t, sim, mc, n_sim, n_mc))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PorismRow {
    pub t: f64,
    pub replicates: usize,
    /// Quantiles (10%, 50%, 90%) of |Y_argmax| / t^{κ/2}.
    pub y_ratio_quantiles: [f64; 3],
    /// Share of replicates with |Y_argmax| > t^{κ/2+ε}.
    pub exceedance: f64,
    /// Quantiles (10%, 50%, 90%) of M_t − max X.
    pub gap_quantiles: [f64; 3],
    pub min_gap: f64,
    pub truncated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PorismReport {
    pub alpha: f64,
    pub eps: f64,
    pub rows: Vec<PorismRow>,
}

/// Where the farthest particle sits in angle, for several horizons.
pub fn porism_probe(
    params: &ModelParams,
    t_list: &[f64],
    replicates: usize,
    eps: f64,
    seed: u64,
    exec: Execution,
) -> Result<PorismReport> {
    if replicates == 0 || t_list.is_empty() {
        return Err(Error::domain("need at least one horizon and one replicate"));
    }
    let k = params.kappa();
    let homogeneous = matches!(params.rate_family, crate::model::RateFamily::Homogeneous);
    let power = if homogeneous { 0.5 } else { 0.5 * k };
    let mut rows = Vec::new();
    for (ti, &t) in t_list.iter().enumerate() {
        let cfg = SimConfig::new(t, mix64(seed ^ ti as u64));
        let runs = run_replicates(params, &cfg, replicates, exec)?;
        let stats: Vec<ExtremalStats> = runs
            .iter()
            .filter(|r| r.population.is_exact())
            .map(|r| r.stats[0])
            .collect();
        let ratio: Vec<f64> = stats
            .iter()
            .map(|s| s.argmax_y.abs() / t.powf(power))
            .collect();
        let gaps: Vec<f64> = stats.iter().map(|s| s.m_t - s.max_x).collect();
        let threshold = t.powf(power + eps);
        let q = |v: &[f64]| {
            [
                numeric::quantile(v, 0.1),
                numeric::quantile(v, 0.5),
                numeric::quantile(v, 0.9),
            ]
        };
        rows.push(PorismRow {
            t,
            replicates,
            y_ratio_quantiles: q(&ratio),
            exceedance: stats
                .iter()
                .filter(|s| s.argmax_y.abs() > threshold)
                .count() as f64
                / stats.len().max(1) as f64,
            gap_quantiles: q(&gaps),
            min_gap: gaps.iter().cloned().fold(f64::INFINITY, f64::min),
            truncated: runs.len() - stats.len(),
        });
    }
    Ok(PorismReport {
        alpha: params.alpha,
        eps,
        rows,
    })
}

/// CSV `replicate,time,lineage_id,x,y` of recorded snapshots.
pub fn write_snapshots_csv<W: Write>(runs: &[RunResult], mut w: W) -> std::io::Result<()> {
    writeln!(w, "replicate,time,lineage_id,x,y")?;
    for (r, run) in runs.iter().enumerate() {
        for s in &run.population.snapshots {
            for (id, (x, y)) in s.lineage_ids.iter().zip(&s.positions) {
                writeln!(w, "{r},{:e},{id:032x},{x:e},{y:e}", s.time)?;
            }
        }
    }
    Ok(())
}

/// CSV `replicate,t,M_t,max_X,argmax_Y,Z_t,barrier_ok,population`.
pub fn write_stats_csv<W: Write>(runs: &[RunResult], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "replicate,t,M_t,max_X,argmax_Y,Z_t,barrier_ok,population"
    )?;
    for (r, run) in runs.iter().enumerate() {
        for s in &run.stats {
            writeln!(
                w,
                "{r},{:e},{:e},{:e},{:e},{:e},{},{}",
                s.t, s.m_t, s.max_x, s.argmax_y, s.z_t, s.barrier_ok, s.population
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_keeps_one_particle() {
        let params = ModelParams::constant_rate(0.0).unwrap();
        let r = run_continuous(&params, &SimConfig::new(5.0, 7)).unwrap();
        assert_eq!(r.population.len(), 1);
        assert_eq!(r.population.particles[0].lineage_id, ROOT_ID);
    }

    #[test]
    fn full_rate_doubles_lattice() {
        let params = ModelParams::homogeneous();
        let run = run_discrete(&params, 10, 1, 1 << 20).unwrap();
        assert_eq!(run.sizes, (0..=10).map(|n| 1usize << n).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_population() {
        let params = ModelParams::sin_pow(1.0).unwrap();
        let mut cfg = SimConfig::new(4.0, 11);
        cfg.snapshot_times = vec![2.0];
        let a = run_continuous(&params, &cfg).unwrap();
        let b = run_continuous(&params, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
