//! The limiting (mean-field) model.
//!
//! The limiting intensity factor solves the deterministic ODE
//! `dλ/dt = α(λ∞ − λ) + βς f(λ)`, and the equilibrium proportion at time `t`
//! is the unique root in `π` of
//!
//! ```text
//! Φ(π, λ) = (γ−1)(σ² + σ0²) π − θγ σ0² π − λ[(1−π)^(γ−1) − 1] + b
//! ```
//!
//! evaluated at `λ = f(λ_t)`. Everything else here (the drift `η`, the
//! adjoint exponent `ρ`, the geometric-mean wealth `m*`) is computed from
//! that path.

use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mc::{stream, Channel};
use crate::model::{AgentType, MeanFieldParams, TimeGrid};
use crate::numeric::{newton_decreasing, rk4_autonomous, trapezoid_tail};

/// Default root tolerance for [`solve_phi`].
pub const PHI_TOL: f64 = 1e-14;
/// Upper end of the root bracket.
pub(crate) const PI_CEILING: f64 = 1.0 - 1e-15;

/// Limiting intensity factor and jump rate on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPath {
    pub grid: TimeGrid,
    pub lambda_l: Vec<f64>,
    pub lambda_f: Vec<f64>,
}

/// RK4 solution of the limiting intensity ODE on `[0, horizon]`.
pub fn solve_intensity_ode(p: &MeanFieldParams, steps: usize) -> Result<IntensityPath> {
    let grid = TimeGrid::new(p.horizon, steps)?;
    let o = &p.limiting;
    let f = &p.jump_rate;
    let excitation = o.beta * o.varsigma;
    // f is only defined on [0, inf); the exact flow never leaves it, RK4
    // stages could only do so for absurd step sizes.
    let rhs = |l: f64| o.alpha * (o.lambda_inf - l) + excitation * f.rate(l.max(0.0));
    let lambda_l = rk4_autonomous(rhs, o.lambda0, p.horizon, steps);
    let lambda_f = lambda_l.iter().map(|&l| f.eval_f(l)).collect::<Result<Vec<_>>>()?;
    Ok(IntensityPath {
        grid,
        lambda_l,
        lambda_f,
    })
}

/// `(1−π)^(γ−1) − 1` without cancellation for small `π`.
#[inline]
pub(crate) fn jump_excess(pi: f64, gamma: f64) -> f64 {
    ((gamma - 1.0) * (-pi).ln_1p()).exp_m1()
}

/// Φ and ∂Φ/∂π. Requires `pi < 1`.
#[inline]
fn phi_and_slope(pi: f64, lambda: f64, o: &AgentType) -> (f64, f64) {
    let s = o.total_variance();
    let linear = (o.gamma - 1.0) * s - o.theta * o.gamma * o.sigma0 * o.sigma0;
    let value = linear * pi - lambda * jump_excess(pi, o.gamma) + o.b;
    let slope = linear + (o.gamma - 1.0) * lambda * (1.0 - pi).powf(o.gamma - 2.0);
    (value, slope)
}

/// Evaluates Φ(π, λ) for the type `o`.
pub fn phi_big(pi: f64, lambda: f64, o: &AgentType) -> Result<f64> {
    if !(pi < 1.0) {
        return Err(Error::domain("phi_big", format!("proportion must be < 1, got {pi}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain("phi_big", format!("intensity must be >= 0, got {lambda}")));
    }
    Ok(phi_and_slope(pi, lambda, o).0)
}

/// ∂Φ/∂π, strictly negative on `(−∞, 1)`.
pub fn phi_big_slope(pi: f64, lambda: f64, o: &AgentType) -> Result<f64> {
    if !(pi < 1.0) {
        return Err(Error::domain("phi_big_slope", format!("proportion must be < 1, got {pi}")));
    }
    Ok(phi_and_slope(pi, lambda, o).1)
}

/// Root of Φ(·, 0): `b / ((1−γ)(σ²+σ0²) + θγσ0²)`. May exceed 1.
pub fn no_jump_root(o: &AgentType) -> f64 {
    o.b / ((1.0 - o.gamma) * o.total_variance() + o.theta * o.gamma * o.sigma0 * o.sigma0)
}

/// The equilibrium map φ(λ): the unique root of Φ(·, λ).
///
/// For `λ > 0` the root lies in `(0, 1)` because `Φ(0, λ) = b > 0` and Φ
/// tends to −∞ as `π → 1`. For `λ = 0` the closed form is returned even when
/// it is ≥ 1.
pub fn solve_phi(lambda: f64, o: &AgentType, tol: f64) -> Result<f64> {
    solve_phi_from(lambda, o, tol, f64::NAN)
}

pub(crate) fn solve_phi_from(lambda: f64, o: &AgentType, tol: f64, guess: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(
            "solve_phi",
            format!("intensity must be finite and >= 0, got {lambda}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("solve_phi", format!("tolerance must be > 0, got {tol}")));
    }
    if lambda == 0.0 {
        return Ok(no_jump_root(o));
    }
    let root = newton_decreasing(|pi| phi_and_slope(pi, lambda, o), 0.0, PI_CEILING, guess, tol)?;
    Ok(root.x)
}

/// Drift of the conditional mean log-wealth, `η(t; π)`.
#[inline]
pub fn eta(pi: f64, lambda: f64, o: &AgentType, r: f64) -> f64 {
    let base = r + (o.b + lambda) * pi - 0.5 * o.sigma * o.sigma * pi * pi;
    if lambda == 0.0 {
        base
    } else {
        base + lambda * (-pi).ln_1p()
    }
}

/// Growth exponent ρ(t) of the adjoint scaling `φ_t = exp(∫_t^T ρ)`.
pub fn rho(pi: f64, lambda: f64, o: &AgentType, r: f64) -> f64 {
    let g = o.gamma;
    let tg = o.theta * g;
    let s0 = o.sigma0 * o.sigma0;
    let pi2 = pi * pi;
    -g * r - (g - 1.0) * (o.b + lambda) * pi + tg * eta(pi, lambda, o, r) + tg * (g - 1.0) * s0 * pi2
        - 0.5 * (g - 1.0) * (g - 2.0) * o.total_variance() * pi2
        - 0.5 * tg * (tg + 1.0) * s0 * pi2
        - if lambda == 0.0 { 0.0 } else { jump_excess(pi, g) * lambda }
}

/// A deterministic strategy path with its drift, adjoint exponent and scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPath {
    pub grid: TimeGrid,
    pub pi_star: Vec<f64>,
    pub eta_star: Vec<f64>,
    pub rho: Vec<f64>,
    pub varphi: Vec<f64>,
    /// Set when some value lies outside `(0, 1)` (only possible when the jump
    /// rate vanishes).
    pub outside_unit: bool,
}

impl EquilibriumPath {
    /// Builds the derived quantities for an arbitrary deterministic strategy.
    pub fn from_strategy(p: &MeanFieldParams, ip: &IntensityPath, pi: Vec<f64>) -> Result<Self> {
        if pi.len() != ip.lambda_f.len() {
            return Err(Error::domain("EquilibriumPath", "strategy and intensity grids differ"));
        }
        // Values at or above 1 only make sense where there is no jump risk.
        if let Some((bad, _)) = pi
            .iter()
            .zip(&ip.lambda_f)
            .find(|(v, l)| !(**v < 1.0) && (**l != 0.0 || !v.is_finite()))
        {
            return Err(Error::domain("EquilibriumPath", format!("strategy value {bad} is not < 1")));
        }
        let o = &p.limiting;
        let eta_star: Vec<f64> = pi.iter().zip(&ip.lambda_f).map(|(&x, &l)| eta(x, l, o, p.r)).collect();
        let rho: Vec<f64> = pi.iter().zip(&ip.lambda_f).map(|(&x, &l)| rho(x, l, o, p.r)).collect();
        let varphi = trapezoid_tail(&rho, ip.grid.dt()).into_iter().map(f64::exp).collect();
        let outside_unit = pi.iter().any(|&x| !(x > 0.0 && x < 1.0));
        Ok(Self {
            grid: ip.grid,
            pi_star: pi,
            eta_star,
            rho,
            varphi,
            outside_unit,
        })
    }

    /// `max_k |Φ(π*_k, λ_k)|`.
    pub fn max_residual(&self, ip: &IntensityPath, o: &AgentType) -> f64 {
        self.pi_star
            .iter()
            .zip(&ip.lambda_f)
            .map(|(&x, &l)| {
                if x < 1.0 {
                    phi_and_slope(x, l, o).0.abs()
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// The deterministic mean-field equilibrium `π*_t = φ(λ_t^f)` along `ip`,
/// warm-starting each root from the previous grid point.
pub fn mfe_path(p: &MeanFieldParams, ip: &IntensityPath, tol: f64) -> Result<EquilibriumPath> {
    let o = &p.limiting;
    let mut pi = Vec::with_capacity(ip.lambda_f.len());
    let mut guess = f64::NAN;
    for &l in &ip.lambda_f {
        let x = solve_phi_from(l, o, tol, guess)?;
        guess = x;
        pi.push(x);
    }
    EquilibriumPath::from_strategy(p, ip, pi)
}

/// Geometric-mean wealth of the limiting population along one common-noise path.
#[derive(Debug, Clone, PartialEq)]
pub struct MStarPath {
    pub grid: TimeGrid,
    pub w0_increments: Vec<f64>,
    pub m_star: Vec<f64>,
}

/// `m*` for given common-noise increments. The `ds` integral uses the
/// trapezoid rule, the stochastic integral the left endpoint.
pub fn m_star_from_increments(p: &MeanFieldParams, ep: &EquilibriumPath, dw0: &[f64]) -> Vec<f64> {
    let o = &p.limiting;
    let dt = ep.grid.dt();
    let drift = |k: usize| ep.eta_star[k] - 0.5 * (o.sigma0 * ep.pi_star[k]).powi(2);
    let mut log_m = p.limiting.x0.ln();
    let mut out = Vec::with_capacity(ep.grid.len());
    out.push(p.limiting.x0);
    for (k, dw) in dw0.iter().enumerate().take(ep.grid.steps) {
        log_m += 0.5 * dt * (drift(k) + drift(k + 1)) + o.sigma0 * ep.pi_star[k] * dw;
        out.push(log_m.exp());
    }
    out
}

/// Draws `ΔW0_k ~ N(0, Δt)` from the common-noise stream of path `path`.
pub fn common_increments(grid: &TimeGrid, seed: u64, path: u64) -> Vec<f64> {
    let mut rng = stream(seed, path, Channel::Common);
    let sd = grid.dt().sqrt();
    (0..grid.steps)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect()
}

/// Samples `m*` along one common-noise path drawn from `seed`.
pub fn sample_m_star(p: &MeanFieldParams, ep: &EquilibriumPath, ip: &IntensityPath, seed: u64) -> Result<MStarPath> {
    if ep.grid != ip.grid {
        return Err(Error::domain("sample_m_star", "equilibrium and intensity grids differ"));
    }
    let w0_increments = common_increments(&ep.grid, seed, 0);
    let m_star = m_star_from_increments(p, ep, &w0_increments);
    Ok(MStarPath {
        grid: ep.grid,
        w0_increments,
        m_star,
    })
}

/// Derivatives of φ with respect to the model parameters at fixed λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticsGradient {
    pub pi: f64,
    pub d_b: f64,
    pub d_sigma: f64,
    pub d_sigma0: f64,
    pub d_gamma: f64,
    pub d_theta: f64,
    /// NaN when λ = 0 and the closed-form root is ≥ 1, where ∂Φ/∂λ is undefined.
    pub d_lambda: f64,
}

/// Implicit-function-theorem derivatives `−∂_x Φ / ∂_π Φ` at the root.
pub fn statics_derivatives(lambda: f64, o: &AgentType) -> Result<StaticsGradient> {
    let pi = solve_phi(lambda, o, PHI_TOL)?;
    let (g, th, s, s0) = (o.gamma, o.theta, o.sigma, o.sigma0);
    let linear_slope = (g - 1.0) * o.total_variance() - th * g * s0 * s0;
    let interior = pi < 1.0;
    // With λ = 0 every jump term drops out, so the linear closed form applies
    // even for a root at or above 1.
    let (d_pi, d_gamma_jump, d_lambda_num) = if lambda > 0.0 && interior {
        let log_u = (-pi).ln_1p();
        (
            linear_slope + (g - 1.0) * lambda * (1.0 - pi).powf(g - 2.0),
            -lambda * ((g - 1.0) * log_u).exp() * log_u,
            -jump_excess(pi, g),
        )
    } else if interior {
        (linear_slope, 0.0, -jump_excess(pi, g))
    } else {
        (linear_slope, 0.0, f64::NAN)
    };
    let d = |partial: f64| -partial / d_pi;
    Ok(StaticsGradient {
        pi,
        d_b: d(1.0),
        d_sigma: d(2.0 * (g - 1.0) * s * pi),
        d_sigma0: d(2.0 * (g - 1.0) * s0 * pi - 2.0 * th * g * s0 * pi),
        d_gamma: d((s * s + (1.0 - th) * s0 * s0) * pi + d_gamma_jump),
        d_theta: d(-g * s0 * s0 * pi),
        d_lambda: d(d_lambda_num),
    })
}

/// Parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Lambda0,
    Alpha,
    LambdaInf,
    Beta,
    Varsigma,
    B,
    Sigma,
    Sigma0,
    Gamma,
    Theta,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lambda0" => SweepParam::Lambda0,
            "alpha" => SweepParam::Alpha,
            "lambda_inf" => SweepParam::LambdaInf,
            "beta" => SweepParam::Beta,
            "varsigma" => SweepParam::Varsigma,
            "b" => SweepParam::B,
            "sigma" => SweepParam::Sigma,
            "sigma0" => SweepParam::Sigma0,
            "gamma" => SweepParam::Gamma,
            "theta" => SweepParam::Theta,
            other => return Err(Error::invalid("param", format!("unknown sweep parameter `{other}`"))),
        })
    }
}

impl SweepParam {
    fn apply(self, o: &mut AgentType, v: f64) {
        let slot = match self {
            SweepParam::Lambda0 => &mut o.lambda0,
            SweepParam::Alpha => &mut o.alpha,
            SweepParam::LambdaInf => &mut o.lambda_inf,
            SweepParam::Beta => &mut o.beta,
            SweepParam::Varsigma => &mut o.varsigma,
            SweepParam::B => &mut o.b,
            SweepParam::Sigma => &mut o.sigma,
            SweepParam::Sigma0 => &mut o.sigma0,
            SweepParam::Gamma => &mut o.gamma,
            SweepParam::Theta => &mut o.theta,
        };
        *slot = v;
    }
}

/// ODE step used by sweeps.
const SWEEP_DT: f64 = 1e-3;

/// `π*_{t_eval}` for each value of `param`, other parameters held at `p`.
pub fn sensitivity_sweep(p: &MeanFieldParams, param: SweepParam, values: &[f64], t_eval: f64) -> Result<Vec<(f64, f64)>> {
    if !(t_eval >= 0.0 && t_eval.is_finite()) {
        return Err(Error::invalid("t", format!("evaluation time must be >= 0, got {t_eval}")));
    }
    values
        .iter()
        .map(|&v| {
            let mut q = p.clone();
            param.apply(&mut q.limiting, v);
            q.limiting.validate("limiting_type")?;
            let lambda_f = if t_eval == 0.0 {
                q.jump_rate.eval_f(q.limiting.lambda0)?
            } else {
                q.horizon = t_eval;
                let steps = ((t_eval / SWEEP_DT).ceil() as usize).max(1000);
                *solve_intensity_ode(&q, steps)?.lambda_f.last().expect("non-empty grid")
            };
            Ok((v, solve_phi(lambda_f, &q.limiting, PHI_TOL)?))
        })
        .collect()
}
