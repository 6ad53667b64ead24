//! Parameter types, the jump-rate function and configuration loading.
//!
//! Time is measured in years and every rate is per year.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Per-agent type vector: initial wealth, intensity-factor parameters,
/// market coefficients and preferences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentType {
    pub x0: f64,
    pub lambda0: f64,
    pub alpha: f64,
    pub lambda_inf: f64,
    pub beta: f64,
    pub varsigma: f64,
    pub b: f64,
    pub sigma: f64,
    pub sigma0: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl Default for AgentType {
    fn default() -> Self {
        Self::table1()
    }
}

impl AgentType {
    /// Reference parameter set.
    pub const fn table1() -> Self {
        Self {
            x0: 1.0,
            lambda0: 0.1,
            alpha: 0.5,
            lambda_inf: 0.6,
            beta: 0.4,
            varsigma: 0.2,
            b: 0.2,
            sigma: 0.3,
            sigma0: 0.2,
            gamma: 0.4,
            theta: 0.5,
        }
    }

    /// Checks every range constraint. `prefix` is prepended to the field name
    /// in the error path.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let path = |field: &str| format!("{prefix}.{field}");
        let positive = [
            ("x0", self.x0),
            ("lambda0", self.lambda0),
            ("alpha", self.alpha),
            ("lambda_inf", self.lambda_inf),
            ("b", self.b),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(path(name), format!("must be finite and > 0, got {v}")));
            }
        }
        // Zero is allowed here: no excitation, or no idiosyncratic/common noise.
        let nonneg = [
            ("beta", self.beta),
            ("varsigma", self.varsigma),
            ("sigma", self.sigma),
            ("sigma0", self.sigma0),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(path(name), format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.sigma * self.sigma + self.sigma0 * self.sigma0 <= 0.0 {
            return Err(Error::invalid(path("sigma"), "sigma and sigma0 cannot both be zero"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(
                path("gamma"),
                format!("must lie in (0, 1), got {}", self.gamma),
            ));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid(
                path("theta"),
                format!("must lie in [0, 1], got {}", self.theta),
            ));
        }
        Ok(())
    }

    /// Total variance rate of the stock, sigma^2 + sigma0^2.
    pub fn total_variance(&self) -> f64 {
        self.sigma * self.sigma + self.sigma0 * self.sigma0
    }

    /// Every field multiplied by `factor`.
    fn scaled(&self, factor: f64) -> Self {
        Self {
            x0: self.x0 * factor,
            lambda0: self.lambda0 * factor,
            alpha: self.alpha * factor,
            lambda_inf: self.lambda_inf * factor,
            beta: self.beta * factor,
            varsigma: self.varsigma * factor,
            b: self.b * factor,
            sigma: self.sigma * factor,
            sigma0: self.sigma0 * factor,
            gamma: self.gamma * factor,
            theta: self.theta * factor,
        }
    }

    /// Bit pattern of the parameters that drive the intensity factor.
    /// Agents sharing this key have identical factor paths.
    pub(crate) fn factor_key(&self) -> [u64; 4] {
        [
            self.lambda0.to_bits(),
            self.alpha.to_bits(),
            self.lambda_inf.to_bits(),
            self.beta.to_bits(),
        ]
    }

    pub(crate) fn bits(&self) -> [u64; 11] {
        [
            self.x0.to_bits(),
            self.lambda0.to_bits(),
            self.alpha.to_bits(),
            self.lambda_inf.to_bits(),
            self.beta.to_bits(),
            self.varsigma.to_bits(),
            self.b.to_bits(),
            self.sigma.to_bits(),
            self.sigma0.to_bits(),
            self.gamma.to_bits(),
            self.theta.to_bits(),
        ]
    }
}

/// The bounded, nondecreasing jump rate `f` applied to an intensity factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpRate {
    /// Identity below `cap`, constant `cap + width` above `cap + width`, joined
    /// by the monotone cubic Hermite bridge with slopes 1 and 0 at the knots.
    CappedLinear { cap: f64, width: f64 },
    /// `f(x) = rate` everywhere.
    Constant { rate: f64 },
    /// Piecewise-linear through `points` (x strictly increasing, y
    /// nondecreasing), constant outside the table range.
    Table { points: Vec<[f64; 2]> },
}

impl Default for JumpRate {
    fn default() -> Self {
        JumpRate::CappedLinear { cap: 100.0, width: 0.01 }
    }
}

impl JumpRate {
    pub fn zero() -> Self {
        JumpRate::Constant { rate: 0.0 }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        match self {
            JumpRate::CappedLinear { cap, width } => {
                if !(cap.is_finite() && *cap > 0.0) {
                    return Err(Error::invalid(format!("{path}.cap"), format!("must be > 0, got {cap}")));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::invalid(format!("{path}.width"), format!("must be > 0, got {width}")));
                }
            }
            JumpRate::Constant { rate } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(Error::invalid(format!("{path}.rate"), format!("must be >= 0, got {rate}")));
                }
            }
            JumpRate::Table { points } => {
                if points.len() < 2 {
                    return Err(Error::invalid(format!("{path}.points"), "need at least two points"));
                }
                for w in points.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return Err(Error::invalid(format!("{path}.points"), "x must be strictly increasing"));
                    }
                    if w[1][1] < w[0][1] {
                        return Err(Error::invalid(format!("{path}.points"), "y must be nondecreasing"));
                    }
                }
                if points[0][0] < 0.0 || points[0][1] < 0.0 || points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                    return Err(Error::invalid(
                        format!("{path}.points"),
                        "points must be finite and nonnegative",
                    ));
                }
            }
        }
        Ok(())
    }

    /// `f(x)`, rejecting negative input.
    pub fn eval_f(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain("eval_f", format!("rate argument must be >= 0, got {x}")));
        }
        Ok(self.rate(x))
    }

    /// `f'(x)`, rejecting negative input. At the knots the one-sided slopes agree.
    pub fn eval_f_prime(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain("eval_f_prime", format!("rate argument must be >= 0, got {x}")));
        }
        Ok(self.slope(x))
    }

    /// Unchecked evaluation for hot loops; callers guarantee `x >= 0`.
    #[inline]
    pub(crate) fn rate(&self, x: f64) -> f64 {
        match *self {
            JumpRate::CappedLinear { cap, width } => {
                if x <= cap {
                    x
                } else if x >= cap + width {
                    cap + width
                } else {
                    let s = (x - cap) / width;
                    cap + width * (s + s * s - s * s * s)
                }
            }
            JumpRate::Constant { rate } => rate,
            JumpRate::Table { ref points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if x <= first[0] {
                    return first[1];
                }
                if x >= last[0] {
                    return last[1];
                }
                let idx = points.partition_point(|p| p[0] <= x);
                let (a, b) = (points[idx - 1], points[idx]);
                a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
            }
        }
    }

    #[inline]
    pub(crate) fn slope(&self, x: f64) -> f64 {
        match *self {
            JumpRate::CappedLinear { cap, width } => {
                if x <= cap {
                    1.0
                } else if x >= cap + width {
                    0.0
                } else {
                    let s = (x - cap) / width;
                    (1.0 - s) * (3.0 * s + 1.0)
                }
            }
            JumpRate::Constant { .. } => 0.0,
            JumpRate::Table { ref points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if x < first[0] || x >= last[0] {
                    return 0.0;
                }
                let idx = points.partition_point(|p| p[0] <= x);
                let (a, b) = (points[idx - 1], points[idx]);
                (b[1] - a[1]) / (b[0] - a[0])
            }
        }
    }

    /// `sup f`, the per-component dominating rate for thinning.
    pub fn upper_bound(&self) -> f64 {
        match *self {
            JumpRate::CappedLinear { cap, width } => cap + width,
            JumpRate::Constant { rate } => rate,
            JumpRate::Table { ref points } => points[points.len() - 1][1],
        }
    }
}

/// Limiting-model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldParams {
    pub limiting: AgentType,
    /// Riskless rate. Not given for the published numerics; defaults to 0.
    pub r: f64,
    pub horizon: f64,
    /// Strategies are admissible when below `1 - epsilon0`.
    pub epsilon0: f64,
    pub jump_rate: JumpRate,
}

impl Default for MeanFieldParams {
    fn default() -> Self {
        Self {
            limiting: AgentType::table1(),
            r: 0.0,
            horizon: 10.0,
            epsilon0: 1e-10,
            jump_rate: JumpRate::default(),
        }
    }
}

impl MeanFieldParams {
    pub fn validate(&self) -> Result<()> {
        self.limiting.validate("limiting_type")?;
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::invalid("market.r", format!("must be >= 0, got {}", self.r)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("market.horizon", format!("must be > 0, got {}", self.horizon)));
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1.0) {
            return Err(Error::invalid(
                "market.epsilon0",
                format!("must lie in (0, 1), got {}", self.epsilon0),
            ));
        }
        self.jump_rate.validate("market.jump_rate")
    }

    pub fn with_limiting(mut self, o: AgentType) -> Self {
        self.limiting = o;
        self
    }

    pub fn with_jump_rate(mut self, f: JumpRate) -> Self {
        self.jump_rate = f;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }
}

/// The n agents of a finite market.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub agents: Vec<AgentType>,
    pub perturbation: f64,
}

impl PopulationSpec {
    /// `n` copies of the limiting type.
    pub fn homogeneous(o: AgentType, n: usize) -> Self {
        Self {
            agents: vec![o; n],
            perturbation: 0.0,
        }
    }

    /// Deterministically jittered population: agent `i` has every field
    /// scaled by `1 + perturbation * c_i / n` with `c_i = +1` for even `i` and
    /// `-1` for odd `i`. The type measure converges to the limiting type at
    /// rate `O(1/n)`.
    pub fn jittered(o: AgentType, n: usize, perturbation: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("population.n", "must be >= 1"));
        }
        if !(perturbation.is_finite() && perturbation >= 0.0) {
            return Err(Error::invalid(
                "population.perturbation",
                format!("must be >= 0, got {perturbation}"),
            ));
        }
        if perturbation == 0.0 {
            return Ok(Self::homogeneous(o, n));
        }
        let agents = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                o.scaled(1.0 + perturbation * sign / n as f64)
            })
            .collect::<Vec<_>>();
        for (i, a) in agents.iter().enumerate() {
            a.validate(&format!("population.agents[{i}]"))?;
        }
        Ok(Self { agents, perturbation })
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }
}

/// Uniform time grid `t_k = k * horizon / steps`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::invalid("run.time_steps", format!("must be >= 2, got {steps}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("market.horizon", format!("must be > 0, got {horizon}")));
        }
        Ok(Self { horizon, steps })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Index of the step `(t_k, t_{k+1}]` containing `t`, clamped to the grid.
    #[inline]
    pub fn step_of(&self, t: f64) -> usize {
        let k = (t / self.dt()).ceil() as usize;
        k.saturating_sub(1).min(self.steps - 1)
    }
}

// ---------------------------------------------------------------------------
// Configuration document

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    pub r: f64,
    pub horizon: f64,
    pub epsilon0: f64,
    pub jump_rate: JumpRate,
}

impl Default for MarketSection {
    fn default() -> Self {
        let p = MeanFieldParams::default();
        Self {
            r: p.r,
            horizon: p.horizon,
            epsilon0: p.epsilon0,
            jump_rate: p.jump_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSection {
    pub n: usize,
    pub perturbation: f64,
}

impl Default for PopulationSection {
    fn default() -> Self {
        Self {
            n: 100,
            perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub time_steps: usize,
    pub mc_paths: usize,
    pub seed: u64,
    pub out_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            time_steps: 10_000,
            mc_paths: 1000,
            seed: 0,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.time_steps < 2 {
            return Err(Error::invalid(
                "run.time_steps",
                format!("must be >= 2, got {}", self.time_steps),
            ));
        }
        if self.mc_paths < 1 {
            return Err(Error::invalid("run.mc_paths", "must be >= 1"));
        }
        Ok(())
    }
}

/// The whole configuration document. Missing sections and fields take the
/// reference defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub market: MarketSection,
    pub limiting_type: AgentType,
    pub population: PopulationSection,
    pub run: RunConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if self.population.n < 1 {
            return Err(Error::invalid("population.n", "must be >= 1"));
        }
        if !(self.population.perturbation.is_finite() && self.population.perturbation >= 0.0) {
            return Err(Error::invalid("population.perturbation", "must be >= 0"));
        }
        self.run.validate()
    }

    pub fn params(&self) -> MeanFieldParams {
        MeanFieldParams {
            limiting: self.limiting_type,
            r: self.market.r,
            horizon: self.market.horizon,
            epsilon0: self.market.epsilon0,
            jump_rate: self.market.jump_rate.clone(),
        }
    }

    pub fn population_spec(&self) -> Result<PopulationSpec> {
        PopulationSpec::jittered(self.limiting_type, self.population.n, self.population.perturbation)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact serialized document.
    pub fn digest(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(compact.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Parses and validates a configuration document.
pub fn load_config(text: &str) -> Result<(MeanFieldParams, PopulationSpec, RunConfig)> {
    let cfg = Config::from_json(text)?;
    Ok((cfg.params(), cfg.population_spec()?, cfg.run.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn capped() -> JumpRate {
        JumpRate::CappedLinear { cap: 100.0, width: 0.01 }
    }

    #[test]
    fn identity_region() {
        let f = capped();
        assert_eq!(f.eval_f(0.5).unwrap(), 0.5);
        assert_eq!(f.eval_f(0.0).unwrap(), 0.0);
        assert_eq!(f.eval_f_prime(3.0).unwrap(), 1.0);
        assert_eq!(f.eval_f_prime(200.0).unwrap(), 0.0);
        assert_eq!(f.eval_f(200.0).unwrap(), 100.01);
    }

    #[test]
    fn negative_argument_is_rejected() {
        assert!(matches!(capped().eval_f(-1e-9), Err(Error::Domain { .. })));
        assert!(matches!(capped().eval_f_prime(-1.0), Err(Error::Domain { .. })));
        assert!(capped().eval_f(f64::NAN).is_err());
    }

    #[test]
    fn hermite_bridge_midpoint() {
        let v = capped().eval_f(100.005).unwrap();
        assert!(v > 100.0 && v < 100.01);
        // s = 1/2: M + delta0 * (1/2 + 1/4 - 1/8)
        assert!((v - 100.00625).abs() < 1e-12);
        // dense monotonicity scan across the bridge
        let mut prev = capped().eval_f(99.99).unwrap();
        for i in 1..=20_000 {
            let x = 99.99 + 0.03 * i as f64 / 20_000.0;
            let y = capped().eval_f(x).unwrap();
            assert!(y >= prev, "not monotone at {x}");
            prev = y;
        }
    }

    #[test]
    fn slope_matches_central_difference() {
        let f = capped();
        let h = 1e-7;
        let fd = (f.rate(100.005 + h) - f.rate(100.005 - h)) / (2.0 * h);
        assert!((fd - f.slope(100.005)).abs() < 1e-6);
        // continuity of the slope across both knots
        for knot in [100.0, 100.01] {
            let left = f.slope(knot - 1e-9);
            let right = f.slope(knot + 1e-9);
            assert!((left - right).abs() < 1e-6, "slope jumps at {knot}");
        }
    }

    #[test]
    fn bounded_and_monotone_on_dense_grid() {
        let f = capped();
        let top = 2.0 * f.upper_bound();
        let mut prev = 0.0;
        for i in 0..=10_000 {
            let x = top * i as f64 / 10_000.0;
            let y = f.eval_f(x).unwrap();
            assert!((0.0..=f.upper_bound()).contains(&y));
            assert!(y >= prev);
            prev = y;
        }
    }

    #[test]
    fn derivative_agrees_with_finite_differences_away_from_knots() {
        let f = capped();
        let h = 1e-6;
        for i in 0..4000 {
            let x = 99.9 + 0.2 * i as f64 / 4000.0 + 1e-5;
            let fd = (f.rate(x + h) - f.rate(x - h)) / (2.0 * h);
            let knot_gap = (x - 100.0).abs().min((x - 100.01).abs());
            if knot_gap > h + 1e-8 {
                assert!((fd - f.slope(x)).abs() < 1e-6, "x = {x}");
            }
        }
    }

    #[test]
    fn table_rate_interpolates() {
        let f = JumpRate::Table {
            points: vec![[0.0, 0.0], [1.0, 2.0], [2.0, 3.0]],
        };
        f.validate("f").unwrap();
        assert_eq!(f.rate(0.5), 1.0);
        assert_eq!(f.rate(1.5), 2.5);
        assert_eq!(f.rate(9.0), 3.0);
        assert_eq!(f.slope(0.5), 2.0);
        assert_eq!(f.upper_bound(), 3.0);
        let bad = JumpRate::Table {
            points: vec![[0.0, 1.0], [1.0, 0.5]],
        };
        assert!(bad.validate("f").is_err());
    }

    #[test]
    fn empty_document_gives_reference_defaults() {
        let (p, pop, run) = load_config("{}").unwrap();
        let o = p.limiting;
        assert_eq!(o.gamma, 0.4);
        assert_eq!(o.theta, 0.5);
        assert_eq!(o.sigma, 0.3);
        assert_eq!(o.sigma0, 0.2);
        assert_eq!(o.b, 0.2);
        assert_eq!(o.lambda0, 0.1);
        assert_eq!(o.lambda_inf, 0.6);
        assert_eq!(o.alpha, 0.5);
        assert_eq!(o.beta, 0.4);
        assert_eq!(o.varsigma, 0.2);
        assert_eq!(p.epsilon0, 1e-10);
        assert_eq!(p.r, 0.0);
        assert_eq!(p.jump_rate, capped());
        assert_eq!(pop.n(), 100);
        assert_eq!(run.time_steps, 10_000);
    }

    #[test]
    fn out_of_range_gamma_names_the_field() {
        let err = load_config(r#"{"limiting_type": {"gamma": 1.2}}"#).unwrap_err();
        match err {
            Error::Invalid { path, .. } => assert_eq!(path, "limiting_type.gamma"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_bad_json_are_parse_errors() {
        assert!(matches!(
            load_config(r#"{"limiting_type": {"gama": 0.3}}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(load_config("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn dirac_population() {
        let (p, pop, _) = load_config(r#"{"population": {"n": 4, "perturbation": 0}}"#).unwrap();
        assert_eq!(pop.n(), 4);
        assert!(pop.agents.iter().all(|a| *a == p.limiting));
    }

    #[test]
    fn jittered_mean_converges_like_one_over_n() {
        let o = AgentType::table1();
        for n in [3usize, 5, 101] {
            let pop = PopulationSpec::jittered(o, n, 0.5).unwrap();
            let mean_b = pop.agents.iter().map(|a| a.b).sum::<f64>() / n as f64;
            // odd n leaves one unmatched +1 sign
            let expected = o.b * (1.0 + 0.5 / (n as f64 * n as f64));
            assert!((mean_b - expected).abs() < 1e-14);
        }
        let even = PopulationSpec::jittered(o, 4, 0.5).unwrap();
        let mean_b = even.agents.iter().map(|a| a.b).sum::<f64>() / 4.0;
        assert!((mean_b - o.b).abs() < 1e-15);
    }

    #[test]
    fn grid_step_lookup() {
        let g = TimeGrid::new(10.0, 100).unwrap();
        assert_eq!(g.step_of(0.0), 0);
        assert_eq!(g.step_of(0.05), 0);
        assert_eq!(g.step_of(0.1), 0);
        assert_eq!(g.step_of(0.1000001), 1);
        assert_eq!(g.step_of(10.0), 99);
        assert!(TimeGrid::new(1.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn config_round_trips_bit_for_bit(
            gamma in 0.01f64..0.99,
            theta in 0.0f64..=1.0,
            sigma in 0.01f64..2.0,
            b in 1e-6f64..1.0,
            lambda0 in 1e-6f64..10.0,
            cap in 0.1f64..1e3,
            seed in any::<u64>(),
        ) {
            let mut cfg = Config::default();
            cfg.limiting_type.gamma = gamma;
            cfg.limiting_type.theta = theta;
            cfg.limiting_type.sigma = sigma;
            cfg.limiting_type.b = b;
            cfg.limiting_type.lambda0 = lambda0;
            cfg.market.jump_rate = JumpRate::CappedLinear { cap, width: cap * 1e-4 };
            cfg.run.seed = seed;
            let text = cfg.to_json();
            let back = Config::from_json(&text).unwrap();
            prop_assert_eq!(back.limiting_type.bits(), cfg.limiting_type.bits());
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.digest(), cfg.digest());
        }

        #[test]
        fn capped_rate_is_bounded_monotone(x in 0.0f64..300.0, dx in 0.0f64..5.0) {
            let f = capped();
            let a = f.rate(x);
            let b = f.rate(x + dx);
            prop_assert!(a >= 0.0 && b <= f.upper_bound());
            prop_assert!(b >= a);
        }
    }
}
