//! n-player wealth simulation, the approximate Nash profile and Monte Carlo
//! estimation of the relative-performance objective.
//!
//! Log-wealth of agent `i` on `(t_k, t_{k+1}]` under the control `π` frozen
//! at `t_k`:
//!
//! ```text
//! Δ log X = (r + bπ − ½(σ² + σ0²)π²) Δt + π ∫ f(λ^i_s) ds + πσ ΔW^i + πσ0 ΔW0 + log(1−π) ΔN^i
//! ```
//!
//! The intensity integral is the exact compensator of the simulated Hawkes
//! path, so the only discretization error comes from freezing the control.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::hawkes::{simulate_hawkes_with, DominatingRate, HawkesOptions, HawkesPath};
use crate::mc::{map_indexed, stream, Channel, Execution, MonteCarlo};
use crate::meanfield::{
    common_increments, jump_excess, m_star_from_increments, EquilibriumPath, IntensityPath, PHI_TOL, PI_CEILING,
};
use crate::model::{AgentType, JumpRate, MeanFieldParams, PopulationSpec, TimeGrid};
use crate::numeric::{mean_se, newton_decreasing, pairwise_sum, MeanSe};

/// Lower admissibility floor for feedback controls. Reaching it is an error.
pub const D0: f64 = -1e6;

#[inline]
fn phi_i_and_slope(pi: f64, lambda: f64, o: &AgentType, competition: f64) -> (f64, f64) {
    let linear = (o.gamma - 1.0) * o.total_variance();
    let value = linear * pi - competition - lambda * jump_excess(pi, o.gamma) + o.b;
    let slope = linear + (o.gamma - 1.0) * lambda * (1.0 - pi).powf(o.gamma - 2.0);
    (value, slope)
}

/// Root of the n-player map
/// `Φ_i(π) = (γ_i−1)(σ_i²+σ_i0²)π − θ_iγ_iσ_i0σ0π*_t − λ(1−π)^{γ_i−1} + λ + b_i`,
/// where `λ` is the agent's current jump rate and `σ0` the common volatility
/// of the limiting type.
pub fn solve_phi_i(lambda: f64, o_i: &AgentType, sigma0: f64, pi_star_t: f64, tol: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(
            "solve_phi_i",
            format!("intensity must be finite and >= 0, got {lambda}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("solve_phi_i", format!("tolerance must be > 0, got {tol}")));
    }
    phi_i_root(lambda, o_i, competition(o_i, sigma0, pi_star_t), tol, f64::NAN)
}

#[inline]
fn competition(o: &AgentType, sigma0: f64, pi_star_t: f64) -> f64 {
    o.theta * o.gamma * o.sigma0 * sigma0 * pi_star_t
}

fn phi_i_root(lambda: f64, o: &AgentType, comp: f64, tol: f64, guess: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok((o.b - comp) / ((1.0 - o.gamma) * o.total_variance()));
    }
    let eval = |pi: f64| phi_i_and_slope(pi, lambda, o, comp);
    let mut lo = 0.0;
    if eval(0.0).0 < 0.0 {
        lo = -1.0;
        while eval(lo).0 < 0.0 {
            lo *= 2.0;
            if lo < D0 {
                return Err(Error::Numerical(format!(
                    "n-player root below the admissibility floor {D0} (λ = {lambda})"
                )));
            }
        }
    }
    Ok(newton_decreasing(eval, lo, PI_CEILING, guess, tol)?.x)
}

/// Control rule of one agent.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Feedback `min(scale · φ_i(t, f(λ^i_t)) + shift, ceiling)`; the
    /// approximate Nash control is `scale = 1, shift = 0, ceiling = ∞`.
    Nash {
        shift: f64,
        scale: f64,
        ceiling: f64,
    },
    /// Deterministic values on the time grid.
    FixedPath(Vec<f64>),
    Constant(f64),
}

impl Strategy {
    pub const NASH: Strategy = Strategy::Nash {
        shift: 0.0,
        scale: 1.0,
        ceiling: f64::INFINITY,
    };
}

/// One strategy per agent, plus the mean-field quantities the feedback rule needs.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub strategies: Vec<Strategy>,
    pub grid: TimeGrid,
    pi_star: Vec<f64>,
    sigma0: f64,
}

impl StrategyProfile {
    /// A profile without feedback strategies.
    pub fn open_loop(strategies: Vec<Strategy>, grid: TimeGrid) -> Result<Self> {
        let profile = Self {
            strategies,
            grid,
            pi_star: Vec::new(),
            sigma0: 0.0,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn n(&self) -> usize {
        self.strategies.len()
    }

    /// The same profile with agent `i` switched to `s`.
    pub fn with_agent(&self, i: usize, s: Strategy) -> Result<Self> {
        if i >= self.n() {
            return Err(Error::domain("with_agent", format!("agent {i} out of range")));
        }
        let mut next = self.clone();
        next.strategies[i] = s;
        next.validate()?;
        Ok(next)
    }

    fn validate(&self) -> Result<()> {
        for (i, s) in self.strategies.iter().enumerate() {
            validate_strategy(s, i, &self.grid, !self.pi_star.is_empty())?;
        }
        Ok(())
    }
}

fn validate_strategy(s: &Strategy, agent: usize, grid: &TimeGrid, has_mfe: bool) -> Result<()> {
    let check = |step: usize, value: f64| {
        if (D0..1.0).contains(&value) {
            Ok(())
        } else {
            Err(Error::Inadmissible { agent, step, value })
        }
    };
    match s {
        Strategy::Constant(v) => check(0, *v),
        Strategy::FixedPath(values) => {
            if values.len() != grid.len() {
                return Err(Error::domain(
                    "StrategyProfile",
                    format!("agent {agent}: path has {} values, grid has {}", values.len(), grid.len()),
                ));
            }
            values.iter().enumerate().try_for_each(|(k, &v)| check(k, v))
        }
        Strategy::Nash { shift, scale, ceiling } => {
            if !has_mfe {
                return Err(Error::domain(
                    "StrategyProfile",
                    "feedback strategy requires an equilibrium path",
                ));
            }
            if !(shift.is_finite() && scale.is_finite()) || ceiling.is_nan() {
                return Err(Error::domain(
                    "StrategyProfile",
                    format!("agent {agent}: non-finite feedback modifier"),
                ));
            }
            Ok(())
        }
    }
}

/// Every agent plays the feedback rule `φ_i(t, Λ^{f,i,n}_t)` built on `ep`.
pub fn build_nash_profile(pop: &PopulationSpec, p: &MeanFieldParams, ep: &EquilibriumPath) -> StrategyProfile {
    StrategyProfile {
        strategies: vec![Strategy::NASH; pop.n()],
        grid: ep.grid,
        pi_star: ep.pi_star.clone(),
        sigma0: p.limiting.sigma0,
    }
}

/// Population, jump rate, interest rate and time grid of a finite market.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub pop: PopulationSpec,
    pub jump_rate: JumpRate,
    pub r: f64,
    pub grid: TimeGrid,
}

impl Market {
    pub fn new(pop: PopulationSpec, p: &MeanFieldParams, steps: usize) -> Result<Self> {
        Ok(Self {
            pop,
            jump_rate: p.jump_rate.clone(),
            r: p.r,
            grid: TimeGrid::new(p.horizon, steps)?,
        })
    }

    pub fn n(&self) -> usize {
        self.pop.n()
    }

    fn check_profile(&self, profile: &StrategyProfile) -> Result<()> {
        if profile.n() != self.n() {
            return Err(Error::domain(
                "market",
                format!("profile has {} strategies for {} agents", profile.n(), self.n()),
            ));
        }
        if profile.grid != self.grid {
            return Err(Error::domain("market", "profile and market grids differ"));
        }
        Ok(())
    }
}

/// Common randomness of one path: Hawkes jumps and common noise.
struct PathCore {
    hawkes: HawkesPath,
    dw0: Vec<f64>,
    /// Jump steps of agent `i` are `jump_steps[jump_offsets[i]..jump_offsets[i + 1]]`.
    jump_offsets: Vec<usize>,
    jump_steps: Vec<usize>,
}

impl PathCore {
    fn new(market: &Market, seed: u64, path: u64) -> Self {
        let mut rng = stream(seed, path, Channel::Hawkes);
        let hawkes = simulate_hawkes_with(
            &market.pop,
            &market.jump_rate,
            market.grid,
            &mut rng,
            HawkesOptions {
                bound: DominatingRate::Local,
                compensator: true,
            },
        );
        Self::from_parts(market, hawkes, common_increments(&market.grid, seed, path))
    }

    fn from_parts(market: &Market, hawkes: HawkesPath, dw0: Vec<f64>) -> Self {
        let n = market.n();
        let mut jump_offsets = vec![0usize; n + 1];
        for j in &hawkes.jumps {
            jump_offsets[j.component as usize + 1] += 1;
        }
        for i in 0..n {
            jump_offsets[i + 1] += jump_offsets[i];
        }
        let mut fill = jump_offsets.clone();
        let mut jump_steps = vec![0usize; hawkes.jumps.len()];
        for j in &hawkes.jumps {
            let c = j.component as usize;
            jump_steps[fill[c]] = market.grid.step_of(j.time);
            fill[c] += 1;
        }
        Self {
            hawkes,
            dw0,
            jump_offsets,
            jump_steps,
        }
    }

    fn jumps_of(&self, agent: usize) -> &[usize] {
        &self.jump_steps[self.jump_offsets[agent]..self.jump_offsets[agent + 1]]
    }
}

/// Control of agent `agent` playing `s` at steps `0..steps` (the value at
/// `t_k` is used on `(t_k, t_{k+1}]`). Depends on the path only through the
/// factor snapshots at the grid points, hence is predictable.
fn control_path(market: &Market, profile: &StrategyProfile, s: &Strategy, agent: usize, hawkes: &HawkesPath) -> Result<Vec<f64>> {
    let steps = market.grid.steps;
    let out: Vec<f64> = match s {
        Strategy::Constant(v) => vec![*v; steps],
        Strategy::FixedPath(values) => values[..steps].to_vec(),
        Strategy::Nash { shift, scale, ceiling } => {
            let o = &market.pop.agents[agent];
            let g = hawkes.group_of(agent);
            let mut guess = f64::NAN;
            let mut out = Vec::with_capacity(steps);
            for k in 0..steps {
                let lambda = market.jump_rate.rate(hawkes.group_factor(g, k));
                let comp = competition(o, profile.sigma0, profile.pi_star[k]);
                let root = phi_i_root(lambda, o, comp, PHI_TOL, guess)?;
                guess = root;
                out.push((scale * root + shift).min(*ceiling));
            }
            out
        }
    };
    if let Some((step, &value)) = out.iter().enumerate().find(|(_, v)| !(**v < 1.0 && **v >= D0)) {
        return Err(Error::Inadmissible { agent, step, value });
    }
    Ok(out)
}

/// Log-wealth of one agent on the grid.
fn log_wealth_path(market: &Market, agent: usize, controls: &[f64], dwi: &[f64], core: &PathCore, out: &mut Vec<f64>) {
    let o = &market.pop.agents[agent];
    let dt = market.grid.dt();
    let var = o.total_variance();
    let jumps = core.jumps_of(agent);
    let mut next_jump = 0;
    let mut log_x = o.x0.ln();
    let mut comp_prev = core.hawkes.compensator(agent, 0).unwrap_or(0.0);
    out.clear();
    out.push(log_x);
    for k in 0..market.grid.steps {
        let pi = controls[k];
        let comp_next = core.hawkes.compensator(agent, k + 1).unwrap_or(0.0);
        log_x += (market.r + o.b * pi - 0.5 * var * pi * pi) * dt
            + pi * (comp_next - comp_prev)
            + pi * (o.sigma * dwi[k] + o.sigma0 * core.dw0[k]);
        comp_prev = comp_next;
        let mut count = 0u32;
        while next_jump < jumps.len() && jumps[next_jump] == k {
            count += 1;
            next_jump += 1;
        }
        if count > 0 {
            log_x += f64::from(count) * (-pi).ln_1p();
        }
        out.push(log_x);
    }
}

fn draw_increments<R: Rng + ?Sized>(rng: &mut R, sd: f64, buf: &mut [f64]) {
    for x in buf.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *x = sd * z;
    }
}

/// Agents sharing type, factor group and strategy share a control path.
struct ControlClasses {
    class_of: Vec<usize>,
    representative: Vec<usize>,
}

impl ControlClasses {
    fn new(market: &Market, profile: &StrategyProfile) -> Self {
        let mut class_of = Vec::with_capacity(market.n());
        let mut representative: Vec<usize> = Vec::new();
        for i in 0..market.n() {
            let a = &market.pop.agents[i];
            let found = representative
                .iter()
                .position(|&r| market.pop.agents[r].bits() == a.bits() && profile.strategies[r] == profile.strategies[i]);
            match found {
                Some(c) => class_of.push(c),
                None => {
                    class_of.push(representative.len());
                    representative.push(i);
                }
            }
        }
        Self {
            class_of,
            representative,
        }
    }

    fn controls(&self, market: &Market, profile: &StrategyProfile, hawkes: &HawkesPath) -> Result<Vec<Vec<f64>>> {
        self.representative
            .iter()
            .map(|&r| control_path(market, profile, &profile.strategies[r], r, hawkes))
            .collect()
    }
}

/// Walks every agent of one path in index order, handing each log-wealth
/// path and idiosyncratic increments to `visit`.
fn for_each_agent(
    market: &Market,
    profile: &StrategyProfile,
    classes: &ControlClasses,
    core: &PathCore,
    seed: u64,
    path: u64,
    mut visit: impl FnMut(usize, &[f64], &[f64]),
) -> Result<()> {
    let controls = classes.controls(market, profile, &core.hawkes)?;
    let mut rng = stream(seed, path, Channel::Idiosyncratic);
    let sd = market.grid.dt().sqrt();
    let mut dwi = vec![0.0; market.grid.steps];
    let mut lw = Vec::with_capacity(market.grid.len());
    for i in 0..market.n() {
        draw_increments(&mut rng, sd, &mut dwi);
        log_wealth_path(market, i, &controls[classes.class_of[i]], &dwi, core, &mut lw);
        visit(i, &lw, &dwi);
    }
    Ok(())
}

/// One simulated market path.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub hawkes: HawkesPath,
    /// Common Brownian increments per step.
    pub w0: Vec<f64>,
    /// Idiosyncratic increments, `wi[agent][step]`.
    pub wi: Vec<Vec<f64>>,
    /// `log_wealth[agent][k]` is `log X^i_{t_k}`.
    pub log_wealth: Vec<Vec<f64>>,
}

impl MarketPath {
    /// `log X̄_{t_k}`: mean log-wealth across agents.
    pub fn log_geometric_mean(&self, k: usize) -> f64 {
        let col: Vec<f64> = self.log_wealth.iter().map(|lw| lw[k]).collect();
        pairwise_sum(&col) / col.len() as f64
    }
}

/// Simulates path `path` of master seed `seed`.
pub fn simulate_market(market: &Market, profile: &StrategyProfile, seed: u64, path: u64) -> Result<MarketPath> {
    market.check_profile(profile)?;
    let classes = ControlClasses::new(market, profile);
    let core = PathCore::new(market, seed, path);
    let mut wi = Vec::with_capacity(market.n());
    let mut log_wealth = Vec::with_capacity(market.n());
    for_each_agent(market, profile, &classes, &core, seed, path, |_, lw, dwi| {
        wi.push(dwi.to_vec());
        log_wealth.push(lw.to_vec());
    })?;
    Ok(MarketPath {
        hawkes: core.hawkes,
        w0: core.dw0,
        wi,
        log_wealth,
    })
}

/// Controls of agent `agent` on the grid for a given Hawkes path.
pub fn control_row(market: &Market, profile: &StrategyProfile, agent: usize, hawkes: &HawkesPath) -> Result<Vec<f64>> {
    market.check_profile(profile)?;
    control_path(market, profile, &profile.strategies[agent], agent, hawkes)
}

/// Monte Carlo estimate of an objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
}

impl From<MeanSe> for ObjectiveEstimate {
    fn from(m: MeanSe) -> Self {
        Self {
            mean: m.mean,
            std_error: m.se,
            paths: m.count,
        }
    }
}

/// `U_i = (1/γ_i) X_i^{γ_i} X̄^{−θ_iγ_i}` computed from log-wealths.
#[inline]
fn utility(o: &AgentType, log_x: f64, log_mean: f64) -> f64 {
    (o.gamma * (log_x - o.theta * log_mean)).exp() / o.gamma
}

/// Terminal values of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub path_id: u64,
    pub log_wealth: Vec<f64>,
    pub jump_counts: Vec<u64>,
}

/// Terminal log-wealths and jump counts for every agent and path.
pub fn simulate_summaries(market: &Market, profile: &StrategyProfile, mc: MonteCarlo) -> Result<Vec<PathSummary>> {
    market.check_profile(profile)?;
    let classes = ControlClasses::new(market, profile);
    let steps = market.grid.steps;
    map_indexed(mc.exec, mc.paths, |p| {
        let core = PathCore::new(market, mc.seed, p as u64);
        let mut log_wealth = Vec::with_capacity(market.n());
        for_each_agent(market, profile, &classes, &core, mc.seed, p as u64, |_, lw, _| {
            log_wealth.push(lw[steps])
        })?;
        Ok(PathSummary {
            path_id: p as u64,
            log_wealth,
            jump_counts: core.hawkes.counts(),
        })
    })
    .into_iter()
    .collect()
}

/// `J_i` for the profile, estimated over `mc.paths` independent paths.
pub fn estimate_objective(market: &Market, profile: &StrategyProfile, i: usize, mc: MonteCarlo) -> Result<ObjectiveEstimate> {
    if mc.paths < 2 {
        return Err(Error::domain("estimate_objective", "need at least 2 paths"));
    }
    if i >= market.n() {
        return Err(Error::domain("estimate_objective", format!("agent {i} out of range")));
    }
    let samples = simulate_summaries(market, profile, mc)?
        .into_iter()
        .map(|s| objective_sample(&market.pop.agents[i], &s.log_wealth, i))
        .collect::<Vec<_>>();
    Ok(mean_se(&samples).into())
}

fn objective_sample(o: &AgentType, log_wealth: &[f64], i: usize) -> f64 {
    let log_mean = pairwise_sum(log_wealth) / log_wealth.len() as f64;
    utility(o, log_wealth[i], log_mean)
}

/// Baseline objective of agent `agent` and the gains from unilateral
/// deviations, estimated with common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationEstimate {
    pub baseline: ObjectiveEstimate,
    /// `J(deviation) − J(baseline)` per deviation, same order as the input.
    pub gains: Vec<ObjectiveEstimate>,
}

/// Evaluates every deviation of agent `agent` on the same paths as the
/// baseline. Other agents' wealths, the Hawkes path and all noise are shared,
/// so a deviation equal to the baseline strategy has gain exactly zero.
pub fn estimate_deviation_gains(
    market: &Market,
    profile: &StrategyProfile,
    agent: usize,
    deviations: &[Strategy],
    mc: MonteCarlo,
) -> Result<DeviationEstimate> {
    market.check_profile(profile)?;
    if mc.paths < 2 {
        return Err(Error::domain("estimate_deviation_gains", "need at least 2 paths"));
    }
    if agent >= market.n() {
        return Err(Error::domain(
            "estimate_deviation_gains",
            format!("agent {agent} out of range"),
        ));
    }
    for d in deviations {
        validate_strategy(d, agent, &market.grid, !profile.pi_star.is_empty())?;
    }
    let classes = ControlClasses::new(market, profile);
    let o = market.pop.agents[agent];
    let n = market.n() as f64;
    let steps = market.grid.steps;
    let per_path = map_indexed(mc.exec, mc.paths, |p| -> Result<Vec<f64>> {
        let core = PathCore::new(market, mc.seed, p as u64);
        let mut finals = Vec::with_capacity(market.n());
        let mut own_dwi = Vec::new();
        for_each_agent(market, profile, &classes, &core, mc.seed, p as u64, |i, lw, dwi| {
            finals.push(lw[steps]);
            if i == agent {
                own_dwi = dwi.to_vec();
            }
        })?;
        let own = finals[agent];
        finals[agent] = 0.0;
        let others = pairwise_sum(&finals);
        let base = utility(&o, own, (others + own) / n);
        let mut row = Vec::with_capacity(deviations.len() + 1);
        row.push(base);
        let mut lw = Vec::with_capacity(market.grid.len());
        // Feedback deviations only modify the unmodified feedback root path.
        let mut roots: Option<Vec<f64>> = None;
        for d in deviations {
            let controls = match d {
                Strategy::Nash { shift, scale, ceiling } => {
                    if roots.is_none() {
                        roots = Some(control_path(market, profile, &Strategy::NASH, agent, &core.hawkes)?);
                    }
                    let raw = roots.as_deref().unwrap_or_default();
                    let c: Vec<f64> = raw.iter().map(|x| (scale * x + shift).min(*ceiling)).collect();
                    if let Some((step, &value)) = c.iter().enumerate().find(|(_, v)| !(**v < 1.0 && **v >= D0)) {
                        return Err(Error::Inadmissible { agent, step, value });
                    }
                    c
                }
                _ => control_path(market, profile, d, agent, &core.hawkes)?,
            };
            log_wealth_path(market, agent, &controls, &own_dwi, &core, &mut lw);
            let x = lw[steps];
            row.push(utility(&o, x, (others + x) / n) - base);
        }
        Ok(row)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let column = |c: usize| per_path.iter().map(|r| r[c]).collect::<Vec<_>>();
    Ok(DeviationEstimate {
        baseline: mean_se(&column(0)).into(),
        gains: (1..=deviations.len()).map(|c| mean_se(&column(c)).into()).collect(),
    })
}

/// Log geometric-mean wealth `log X̄_{t_k}` on the grid for path `path`,
/// together with the common-noise increments that drove it.
pub fn log_geometric_mean_path(market: &Market, profile: &StrategyProfile, seed: u64, path: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    market.check_profile(profile)?;
    let classes = ControlClasses::new(market, profile);
    let core = PathCore::new(market, seed, path);
    let mut sums = vec![0.0; market.grid.len()];
    for_each_agent(market, profile, &classes, &core, seed, path, |_, lw, _| {
        for (s, v) in sums.iter_mut().zip(lw) {
            *s += v;
        }
    })?;
    let n = market.n() as f64;
    sums.iter_mut().for_each(|s| *s /= n);
    Ok((sums, core.dw0))
}

/// Simulates `k` independent representative agents under the equilibrium
/// strategy along one common-noise path and returns
/// `max_k |exp(mean log X_{t_k}) − m*_{t_k}|`.
///
/// Each agent's jumps follow the deterministic intensity `λ^{f,o}`,
/// linearly interpolated between grid points, simulated by thinning; the
/// jump loss is evaluated at the exact jump time with the strategy
/// interpolated the same way.
pub fn mean_log_wealth_consistency(
    p: &MeanFieldParams,
    ep: &EquilibriumPath,
    ip: &IntensityPath,
    k: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain("mean_log_wealth_consistency", "need at least 2 agents"));
    }
    if ep.grid != ip.grid {
        return Err(Error::domain(
            "mean_log_wealth_consistency",
            "equilibrium and intensity grids differ",
        ));
    }
    if let Some(&bad) = ep.pi_star.iter().find(|v| !(**v < 1.0)) {
        return Err(Error::domain(
            "mean_log_wealth_consistency",
            format!("strategy value {bad} is not < 1"),
        ));
    }
    let o = &p.limiting;
    let grid = ep.grid;
    let dt = grid.dt();
    let steps = grid.steps;
    let dw0 = common_increments(&grid, seed, 0);
    let m_star = m_star_from_increments(p, ep, &dw0);

    // Deterministic part shared by all agents: trapezoid of the drift without
    // the jump loss, plus the common-noise integral.
    let lam = &ip.lambda_f;
    let pi = &ep.pi_star;
    let drift = |j: usize| p.r + (o.b + lam[j]) * pi[j] - 0.5 * o.total_variance() * pi[j] * pi[j];
    let mut common = Vec::with_capacity(grid.len());
    let mut acc = o.x0.ln();
    common.push(acc);
    for j in 0..steps {
        acc += 0.5 * dt * (drift(j) + drift(j + 1)) + o.sigma0 * pi[j] * dw0[j];
        common.push(acc);
    }

    let bound = lam.iter().cloned().fold(0.0, f64::max);
    const BLOCK: usize = 256;
    let blocks = k.div_ceil(BLOCK);
    let partial = map_indexed(exec, blocks, |b| {
        let mut sums = vec![0.0; grid.len()];
        for agent in b * BLOCK..((b + 1) * BLOCK).min(k) {
            let mut w_rng = stream(seed, agent as u64, Channel::Idiosyncratic);
            let mut n_rng = stream(seed, agent as u64, Channel::Auxiliary);
            // idiosyncratic part, accumulated on the grid
            let mut idio = vec![0.0; grid.len()];
            let sd = dt.sqrt();
            for j in 0..steps {
                let z: f64 = StandardNormal.sample(&mut w_rng);
                idio[j + 1] = idio[j] + o.sigma * pi[j] * sd * z;
            }
            // jump losses by thinning on the interpolated intensity
            if bound > 0.0 {
                let mut t = 0.0;
                loop {
                    let e: f64 = Exp1.sample(&mut n_rng);
                    t += e / bound;
                    if t > grid.horizon {
                        break;
                    }
                    let j = grid.step_of(t);
                    let w = ((t - grid.time(j)) / dt).clamp(0.0, 1.0);
                    let rate = lam[j] + w * (lam[j + 1] - lam[j]);
                    if n_rng.random::<f64>() * bound < rate {
                        let loss = (-(pi[j] + w * (pi[j + 1] - pi[j]))).ln_1p();
                        for v in &mut idio[j + 1..] {
                            *v += loss;
                        }
                    }
                }
            }
            for (s, v) in sums.iter_mut().zip(&idio) {
                *s += v;
            }
        }
        sums
    });
    let mut total = vec![0.0; grid.len()];
    for part in &partial {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    // m* carries the expected jump loss in its drift; the agents carry the
    // realized losses.
    let dev = (0..grid.len())
        .map(|j| ((common[j] + total[j] / k as f64).exp() - m_star[j]).abs())
        .fold(0.0, f64::max);
    Ok(dev)
}

/// Closed-form `E[U(X_T)]` for a single agent with constant control `pi`,
/// no relative concern and a deterministic jump rate with integral
/// `rate_integral` over `[0, horizon]`:
///
/// ```text
/// x0^γ exp(γ(r + bπ)T + ½γ(γ−1)π²(σ²+σ0²)T + ((1−π)^γ + γπ − 1) ∫λ) / γ
/// ```
pub fn moment_oracle(o: &AgentType, pi: f64, r: f64, horizon: f64, rate_integral: f64) -> f64 {
    let g = o.gamma;
    let exponent = g * (r + o.b * pi) * horizon
        + 0.5 * g * (g - 1.0) * pi * pi * o.total_variance() * horizon
        + ((1.0 - pi).powf(g) + g * pi - 1.0) * rate_integral;
    o.x0.powf(g) * exponent.exp() / g
}
