//! Exact simulation of the n-dimensional nonlinear Hawkes system
//!
//! ```text
//! dλ^i = α_i(λ∞^i − λ^i) dt + (β_i / n) Σ_j ς_j dN^j,    N^i has intensity f(λ^i)
//! ```
//!
//! by Ogata thinning. Between jumps each factor follows the exact mean-reverting
//! flow; a jump of component `j` raises every factor `i` by `β_i ς_j / n`.
//!
//! Agents with the same `(λ0, α, λ∞, β)` receive identical increments and
//! therefore share one factor path. The simulator tracks one factor per such
//! group, so the cost per event scales with the number of distinct types
//! rather than with `n`.

use std::io::{self, Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::mc::{stream, Channel};
use crate::model::{JumpRate, PopulationSpec, TimeGrid};
use crate::numeric::gauss_legendre5;

/// Exact between-jump flow: `λ∞ + (λ − λ∞) e^{−α dt}`.
pub fn decay_factor(lambda: f64, alpha: f64, lambda_inf: f64, dt: f64) -> Result<f64> {
    if !(dt >= 0.0) {
        return Err(Error::domain("decay_factor", format!("elapsed time must be >= 0, got {dt}")));
    }
    Ok(decay(lambda, alpha, lambda_inf, dt))
}

#[inline]
fn decay(lambda: f64, alpha: f64, lambda_inf: f64, dt: f64) -> f64 {
    lambda_inf + (lambda - lambda_inf) * (-alpha * dt).exp()
}

/// Full per-agent state of the system at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesState {
    pub t: f64,
    pub lambda_factors: Vec<f64>,
    pub counts: Vec<u64>,
}

impl HawkesState {
    pub fn initial(pop: &PopulationSpec) -> Self {
        Self {
            t: 0.0,
            lambda_factors: pop.agents.iter().map(|a| a.lambda0).collect(),
            counts: vec![0; pop.n()],
        }
    }
}

/// The state after a jump of component `j`.
pub fn apply_jump(state: &HawkesState, j: usize, pop: &PopulationSpec) -> Result<HawkesState> {
    let n = pop.n();
    if j >= n || state.lambda_factors.len() != n {
        return Err(Error::domain("apply_jump", format!("component {j} out of range for n = {n}")));
    }
    let push = pop.agents[j].varsigma / n as f64;
    let mut next = state.clone();
    for (l, a) in next.lambda_factors.iter_mut().zip(&pop.agents) {
        *l += a.beta * push;
    }
    next.counts[j] += 1;
    Ok(next)
}

/// One accepted event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub component: u32,
}

/// Agents grouped by intensity parameters.
#[derive(Debug, Clone, PartialEq)]
struct FactorGroups {
    lambda0: Vec<f64>,
    alpha: Vec<f64>,
    lambda_inf: Vec<f64>,
    beta: Vec<f64>,
    members: Vec<Vec<u32>>,
    agent_group: Vec<u32>,
    /// ς_j / n for every agent.
    push: Vec<f64>,
}

impl FactorGroups {
    fn new(pop: &PopulationSpec) -> Self {
        let n = pop.n();
        let mut keys: Vec<[u64; 4]> = Vec::new();
        let mut g = FactorGroups {
            lambda0: Vec::new(),
            alpha: Vec::new(),
            lambda_inf: Vec::new(),
            beta: Vec::new(),
            members: Vec::new(),
            agent_group: Vec::with_capacity(n),
            push: pop.agents.iter().map(|a| a.varsigma / n as f64).collect(),
        };
        for (i, a) in pop.agents.iter().enumerate() {
            let key = a.factor_key();
            let idx = match keys.iter().position(|k| *k == key) {
                Some(idx) => idx,
                None => {
                    keys.push(key);
                    g.lambda0.push(a.lambda0);
                    g.alpha.push(a.alpha);
                    g.lambda_inf.push(a.lambda_inf);
                    g.beta.push(a.beta);
                    g.members.push(Vec::new());
                    keys.len() - 1
                }
            };
            g.members[idx].push(i as u32);
            g.agent_group.push(idx as u32);
        }
        g
    }

    fn len(&self) -> usize {
        self.members.len()
    }
}

/// How the thinning envelope is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DominatingRate {
    /// `n · sup f` throughout.
    Global,
    /// `Σ_i f(max(λ_i, λ∞_i))`, recomputed after every candidate. Valid until
    /// the next jump because each factor moves monotonically toward `λ∞_i`
    /// and `f` is nondecreasing.
    #[default]
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HawkesOptions {
    pub bound: DominatingRate,
    /// Also integrate `∫ f(λ_s) ds` per factor group on the grid.
    pub compensator: bool,
}

/// A simulated (or replayed) path.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesPath {
    pub grid: TimeGrid,
    pub jumps: Vec<JumpRecord>,
    groups: FactorGroups,
    /// `snapshots[k * groups + g]` is the factor of group `g` at `t_k`.
    snapshots: Vec<f64>,
    compensators: Option<Vec<f64>>,
}

impl HawkesPath {
    pub fn n(&self) -> usize {
        self.groups.agent_group.len()
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn group_of(&self, agent: usize) -> usize {
        self.groups.agent_group[agent] as usize
    }

    pub fn group_members(&self, group: usize) -> &[u32] {
        &self.groups.members[group]
    }

    /// Factor of agent `i` at grid point `k`.
    #[inline]
    pub fn factor(&self, agent: usize, k: usize) -> f64 {
        self.group_factor(self.group_of(agent), k)
    }

    #[inline]
    pub fn group_factor(&self, group: usize, k: usize) -> f64 {
        self.snapshots[k * self.groups.len() + group]
    }

    /// All factors at grid point `k`, one per agent.
    pub fn factor_row(&self, k: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.factor(i, k)).collect()
    }

    /// Empirical mean jump rate `(1/n) Σ_i f(λ_i)` at grid point `k`.
    pub fn mean_rate(&self, f: &JumpRate, k: usize) -> f64 {
        let total: f64 = (0..self.groups.len())
            .map(|g| self.groups.members[g].len() as f64 * f.rate(self.group_factor(g, k)))
            .sum();
        total / self.n() as f64
    }

    /// `∫_0^{t_k} f(λ_i(s)) ds`, when the path was simulated with compensator tracking.
    pub fn compensator(&self, agent: usize, k: usize) -> Option<f64> {
        let g = self.group_of(agent);
        self.compensators.as_ref().map(|c| c[k * self.groups.len() + g])
    }

    /// Jump counts per agent over the whole horizon.
    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0; self.n()];
        for j in &self.jumps {
            c[j.component as usize] += 1;
        }
        c
    }

    /// `N^i_t`: jumps of agent `i` at times `<= t`.
    pub fn count_until(&self, agent: usize, t: f64) -> u64 {
        self.jumps
            .iter()
            .take_while(|j| j.time <= t)
            .filter(|j| j.component as usize == agent)
            .count() as u64
    }
}

/// Group factors plus bookkeeping shared by simulation and replay.
struct Engine<'a> {
    grid: TimeGrid,
    f: &'a JumpRate,
    groups: FactorGroups,
    lambda: Vec<f64>,
    comp: Option<Vec<f64>>,
    t: f64,
    next_k: usize,
    snapshots: Vec<f64>,
    comp_snapshots: Option<Vec<f64>>,
    jumps: Vec<JumpRecord>,
}

impl<'a> Engine<'a> {
    fn new(pop: &PopulationSpec, f: &'a JumpRate, grid: TimeGrid, track: bool) -> Self {
        let groups = FactorGroups::new(pop);
        let g = groups.len();
        let lambda = groups.lambda0.clone();
        let mut snapshots = Vec::with_capacity(grid.len() * g);
        snapshots.extend_from_slice(&lambda);
        let comp = track.then(|| vec![0.0; g]);
        let comp_snapshots = comp.as_ref().map(|c| {
            let mut v = Vec::with_capacity(grid.len() * g);
            v.extend_from_slice(c);
            v
        });
        Self {
            grid,
            f,
            groups,
            lambda,
            comp,
            t: 0.0,
            next_k: 1,
            snapshots,
            comp_snapshots,
            jumps: Vec::new(),
        }
    }

    /// Flows every factor forward to `to`.
    fn advance(&mut self, to: f64) {
        let dt = to - self.t;
        if dt <= 0.0 {
            return;
        }
        if let Some(comp) = self.comp.as_mut() {
            for (g, c) in comp.iter_mut().enumerate() {
                let (l0, a, li) = (self.lambda[g], self.groups.alpha[g], self.groups.lambda_inf[g]);
                *c += gauss_legendre5(|s| self.f.rate(decay(l0, a, li, s)), 0.0, dt);
            }
        }
        for g in 0..self.groups.len() {
            self.lambda[g] = decay(self.lambda[g], self.groups.alpha[g], self.groups.lambda_inf[g], dt);
        }
        self.t = to;
    }

    /// Records every grid point with time `<= until`.
    fn record_through(&mut self, until: f64) {
        while self.next_k <= self.grid.steps && self.grid.time(self.next_k) <= until {
            self.advance(self.grid.time(self.next_k));
            self.snapshots.extend_from_slice(&self.lambda);
            if let (Some(cs), Some(c)) = (self.comp_snapshots.as_mut(), self.comp.as_ref()) {
                cs.extend_from_slice(c);
            }
            self.next_k += 1;
        }
    }

    fn jump(&mut self, agent: usize) {
        let push = self.groups.push[agent];
        for g in 0..self.groups.len() {
            self.lambda[g] += self.groups.beta[g] * push;
        }
        self.jumps.push(JumpRecord {
            time: self.t,
            component: agent as u32,
        });
    }

    fn local_bound(&self) -> f64 {
        (0..self.groups.len())
            .map(|g| {
                let peak = self.lambda[g].max(self.groups.lambda_inf[g]);
                self.groups.members[g].len() as f64 * self.f.rate(peak)
            })
            .sum()
    }

    fn finish(mut self) -> HawkesPath {
        self.record_through(self.grid.horizon);
        HawkesPath {
            grid: self.grid,
            jumps: self.jumps,
            groups: self.groups,
            snapshots: self.snapshots,
            compensators: self.comp_snapshots,
        }
    }
}

/// Simulates one path with the default options from stream `(seed, 0)`.
pub fn simulate_hawkes(pop: &PopulationSpec, f: &JumpRate, grid: TimeGrid, seed: u64) -> HawkesPath {
    let mut rng = stream(seed, 0, Channel::Hawkes);
    simulate_hawkes_with(pop, f, grid, &mut rng, HawkesOptions::default())
}

/// Ogata thinning on `[0, grid.horizon]`.
pub fn simulate_hawkes_with<R: Rng + ?Sized>(
    pop: &PopulationSpec,
    f: &JumpRate,
    grid: TimeGrid,
    rng: &mut R,
    opts: HawkesOptions,
) -> HawkesPath {
    let mut eng = Engine::new(pop, f, grid, opts.compensator);
    let global = pop.n() as f64 * f.upper_bound();
    let horizon = grid.horizon;
    loop {
        let bound = match opts.bound {
            DominatingRate::Global => global,
            DominatingRate::Local => eng.local_bound(),
        };
        if bound <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(rng);
        let candidate = eng.t + wait / bound;
        if candidate > horizon {
            break;
        }
        eng.record_through(candidate);
        eng.advance(candidate);
        let u = rng.random::<f64>() * bound;
        // Inverse transform over the cumulative rates: u below the total
        // accepts, and its position selects the component.
        let mut acc = 0.0;
        let mut chosen = None;
        for g in 0..eng.groups.len() {
            let rate = f.rate(eng.lambda[g]);
            let size = eng.groups.members[g].len();
            let weight = size as f64 * rate;
            if u < acc + weight {
                let offset = (((u - acc) / rate) as usize).min(size - 1);
                chosen = Some(eng.groups.members[g][offset] as usize);
                break;
            }
            acc += weight;
        }
        if let Some(agent) = chosen {
            eng.jump(agent);
        }
    }
    eng.finish()
}

/// Rebuilds a path from a jump list: the factors between jumps are exactly
/// determined by the jump times and components.
pub fn replay(pop: &PopulationSpec, f: &JumpRate, grid: TimeGrid, jumps: &[JumpRecord]) -> Result<HawkesPath> {
    let mut eng = Engine::new(pop, f, grid, false);
    let mut last = 0.0;
    for (idx, j) in jumps.iter().enumerate() {
        if j.component as usize >= pop.n() {
            return Err(Error::domain(
                "replay",
                format!("jump {idx}: component {} out of range", j.component),
            ));
        }
        if !(j.time > last || (idx == 0 && j.time >= 0.0)) || j.time > grid.horizon {
            return Err(Error::domain(
                "replay",
                format!("jump {idx}: time {} not strictly increasing within the horizon", j.time),
            ));
        }
        last = j.time;
        eng.record_through(j.time);
        eng.advance(j.time);
        eng.jump(j.component as usize);
    }
    Ok(eng.finish())
}

const DUMP_MAGIC: &[u8; 4] = b"HWKS";
const DUMP_VERSION: u32 = 1;

/// Writes the binary jump dump: a 16-byte header (`HWKS`, version, n, count;
/// all little-endian u32 after the magic) followed by `(f64 time, u32
/// component)` records.
pub fn write_jumps<W: Write>(mut w: W, n: usize, jumps: &[JumpRecord]) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| Error::domain("write_jumps", "n does not fit in u32"))?;
    let count = u32::try_from(jumps.len()).map_err(|_| Error::domain("write_jumps", "too many jumps"))?;
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    for j in jumps {
        w.write_all(&j.time.to_le_bytes())?;
        w.write_all(&j.component.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a dump written by [`write_jumps`]; returns `n` and the jumps.
pub fn read_jumps<R: Read>(mut r: R) -> Result<(usize, Vec<JumpRecord>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != DUMP_MAGIC {
        return Err(Error::Io(io::Error::new(
            io::ErrorKind::InvalidData,
            "bad magic, expected HWKS",
        )));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
    if word(4) != DUMP_VERSION {
        return Err(Error::Io(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unsupported dump version {}", word(4)),
        )));
    }
    let (n, count) = (word(8) as usize, word(12) as usize);
    let mut jumps = Vec::with_capacity(count);
    let mut rec = [0u8; 12];
    for _ in 0..count {
        r.read_exact(&mut rec)?;
        jumps.push(JumpRecord {
            time: f64::from_le_bytes(rec[..8].try_into().expect("8 bytes")),
            component: u32::from_le_bytes(rec[8..].try_into().expect("4 bytes")),
        });
    }
    Ok((n, jumps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AgentType;
    use proptest::prelude::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(10.0, 1000).unwrap()
    }

    #[test]
    fn decay_limits_and_value() {
        assert_eq!(decay_factor(0.3, 0.5, 0.6, 0.0).unwrap(), 0.3);
        assert!((decay_factor(0.3, 0.5, 0.6, 1e4).unwrap() - 0.6).abs() < 1e-15);
        let v = decay_factor(0.1, 0.5, 0.6, 1.0).unwrap();
        assert!((v - 0.296_734_670_143_683_3).abs() < 1e-15);
        assert!(decay_factor(0.1, 0.5, 0.6, -1.0).is_err());
    }

    #[test]
    fn global_and_local_bounds_agree_in_distribution() {
        let mut o = AgentType::table1();
        o.beta = 2.0;
        let pop = PopulationSpec::homogeneous(o, 5);
        let f = JumpRate::CappedLinear { cap: 1.5, width: 0.5 };
        let total = |bound: DominatingRate, seed: u64| {
            let opts = HawkesOptions {
                bound,
                compensator: false,
            };
            let xs: Vec<f64> = (0..3000)
                .map(|p| {
                    let mut rng = stream(seed, p, Channel::Hawkes);
                    simulate_hawkes_with(&pop, &f, grid(), &mut rng, opts).jumps.len() as f64
                })
                .collect();
            crate::numeric::mean_se(&xs)
        };
        let g = total(DominatingRate::Global, 1);
        let l = total(DominatingRate::Local, 2);
        let z = (g.mean - l.mean) / (g.se * g.se + l.se * l.se).sqrt();
        assert!(z.abs() < 4.0, "global {} local {} z {z}", g.mean, l.mean);
    }

    #[test]
    fn jump_raises_every_factor() {
        let pop = PopulationSpec::homogeneous(AgentType::table1(), 4);
        let s0 = HawkesState::initial(&pop);
        let s1 = apply_jump(&s0, 2, &pop).unwrap();
        for (a, b) in s0.lambda_factors.iter().zip(&s1.lambda_factors) {
            assert!((b - a - 0.02).abs() < 1e-15);
        }
        assert_eq!(s1.counts, vec![0, 0, 1, 0]);
        assert!(apply_jump(&s0, 4, &pop).is_err());
        let big = PopulationSpec::homogeneous(AgentType::table1(), 4000);
        let s = apply_jump(&HawkesState::initial(&big), 0, &big).unwrap();
        assert!((s.lambda_factors[1] - 0.1 - 0.08 / 4000.0).abs() < 1e-15);
    }

    #[test]
    fn heterogeneous_jump_uses_sender_varsigma_and_receiver_beta() {
        let mut a = AgentType::table1();
        let mut b = AgentType::table1();
        a.beta = 1.0;
        a.varsigma = 0.1;
        b.beta = 2.0;
        b.varsigma = 0.5;
        let pop = PopulationSpec {
            agents: vec![a, b],
            perturbation: 0.0,
        };
        let s = apply_jump(&HawkesState::initial(&pop), 1, &pop).unwrap();
        assert!((s.lambda_factors[0] - (0.1 + 1.0 * 0.5 / 2.0)).abs() < 1e-15);
        assert!((s.lambda_factors[1] - (0.1 + 2.0 * 0.5 / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn grouped_path_matches_per_agent_state_machine() {
        let pop = PopulationSpec::jittered(AgentType::table1(), 5, 0.3).unwrap();
        let f = JumpRate::default();
        let path = simulate_hawkes(&pop, &f, grid(), 9);
        assert!(!path.jumps.is_empty());
        // drive the plain state machine through the same jumps
        let mut state = HawkesState::initial(&pop);
        for j in &path.jumps {
            let dt = j.time - state.t;
            for (l, a) in state.lambda_factors.iter_mut().zip(&pop.agents) {
                *l = decay_factor(*l, a.alpha, a.lambda_inf, dt).unwrap();
            }
            state.t = j.time;
            state = apply_jump(&state, j.component as usize, &pop).unwrap();
        }
        let dt = 10.0 - state.t;
        for (i, a) in pop.agents.iter().enumerate() {
            let expected = decay_factor(state.lambda_factors[i], a.alpha, a.lambda_inf, dt).unwrap();
            assert!((path.factor(i, 1000) - expected).abs() < 1e-10);
        }
        assert_eq!(path.counts(), state.counts);
    }

    #[test]
    fn replay_reproduces_snapshots() {
        let pop = PopulationSpec::jittered(AgentType::table1(), 7, 0.5).unwrap();
        let f = JumpRate::default();
        let path = simulate_hawkes(&pop, &f, grid(), 2);
        let again = replay(&pop, &f, grid(), &path.jumps).unwrap();
        for k in 0..=1000 {
            for i in 0..7 {
                assert!((path.factor(i, k) - again.factor(i, k)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn replay_rejects_bad_jump_lists() {
        let pop = PopulationSpec::homogeneous(AgentType::table1(), 2);
        let f = JumpRate::default();
        let j = |time, component| JumpRecord { time, component };
        assert!(replay(&pop, &f, grid(), &[j(1.0, 2)]).is_err());
        assert!(replay(&pop, &f, grid(), &[j(2.0, 0), j(1.0, 1)]).is_err());
        assert!(replay(&pop, &f, grid(), &[j(2.0, 0), j(2.0, 1)]).is_err());
        assert!(replay(&pop, &f, grid(), &[j(11.0, 0)]).is_err());
    }

    #[test]
    fn path_invariants() {
        let pop = PopulationSpec::homogeneous(AgentType::table1(), 16);
        let f = JumpRate::default();
        for seed in 0..20 {
            let path = simulate_hawkes(&pop, &f, grid(), seed);
            assert!(path.jumps.windows(2).all(|w| w[1].time > w[0].time));
            assert!(path.snapshots.iter().all(|&l| l > 0.0));
            assert_eq!(path.group_count(), 1);
        }
    }

    #[test]
    fn same_seed_same_path() {
        let pop = PopulationSpec::jittered(AgentType::table1(), 9, 0.2).unwrap();
        let f = JumpRate::default();
        assert_eq!(simulate_hawkes(&pop, &f, grid(), 5), simulate_hawkes(&pop, &f, grid(), 5));
        assert_ne!(
            simulate_hawkes(&pop, &f, grid(), 5).jumps,
            simulate_hawkes(&pop, &f, grid(), 6).jumps
        );
    }

    #[test]
    fn zero_rate_never_jumps() {
        let pop = PopulationSpec::homogeneous(AgentType::table1(), 3);
        let path = simulate_hawkes(&pop, &JumpRate::zero(), grid(), 1);
        assert!(path.jumps.is_empty());
        let o = AgentType::table1();
        let expected = o.lambda_inf + (o.lambda0 - o.lambda_inf) * (-o.alpha * 10.0f64).exp();
        assert!((path.factor(0, 1000) - expected).abs() < 1e-14);
    }

    #[test]
    fn compensator_is_exact_without_jumps() {
        // f = identity and no excitation: ∫λ = λ∞ t + (λ0 − λ∞)(1 − e^{−αt})/α
        let mut o = AgentType::table1();
        o.beta = 0.0;
        let pop = PopulationSpec::homogeneous(o, 2);
        let f = JumpRate::default();
        let mut rng = stream(3, 0, Channel::Hawkes);
        let path = simulate_hawkes_with(
            &pop,
            &f,
            grid(),
            &mut rng,
            HawkesOptions {
                compensator: true,
                ..Default::default()
            },
        );
        let t = 10.0;
        let exact = o.lambda_inf * t + (o.lambda0 - o.lambda_inf) * (1.0 - (-o.alpha * t).exp()) / o.alpha;
        assert!((path.compensator(0, 1000).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn dump_round_trip_and_header_layout() {
        let pop = PopulationSpec::homogeneous(AgentType::table1(), 3);
        let path = simulate_hawkes(&pop, &JumpRate::default(), grid(), 4);
        let mut buf = Vec::new();
        write_jumps(&mut buf, 3, &path.jumps).unwrap();
        assert_eq!(&buf[..4], b"HWKS");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize, path.jumps.len());
        assert_eq!(buf.len(), 16 + 12 * path.jumps.len());
        let (n, back) = read_jumps(buf.as_slice()).unwrap();
        assert_eq!(n, 3);
        assert_eq!(back, path.jumps);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_jumps(bad.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn decay_moves_monotonically_toward_level(l in 1e-3f64..10.0, li in 1e-3f64..10.0, a in 1e-3f64..5.0, dt in 0.0f64..10.0) {
            let v = decay_factor(l, a, li, dt).unwrap();
            prop_assert!(v >= l.min(li) - 1e-12 && v <= l.max(li) + 1e-12);
            // semigroup property
            let half = decay_factor(decay_factor(l, a, li, dt / 2.0).unwrap(), a, li, dt / 2.0).unwrap();
            prop_assert!((half - v).abs() < 1e-12 * (1.0 + v));
        }
    }
}
