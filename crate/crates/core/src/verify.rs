//! Convergence-rate experiments for the finite-population system and the
//! deviation-gain probe of the approximate Nash profile.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hawkes::{simulate_hawkes_with, HawkesOptions};
use crate::market::{build_nash_profile, estimate_deviation_gains, log_geometric_mean_path, Market, Strategy};
use crate::mc::{map_indexed, stream, Channel, MonteCarlo};
use crate::meanfield::{m_star_from_increments, EquilibriumPath, IntensityPath};
use crate::model::{AgentType, MeanFieldParams, PopulationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    IntensityMse,
    GeomWealthMse,
    NashGain,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::IntensityMse => "intensity-mse",
            Metric::GeomWealthMse => "geom-wealth-mse",
            Metric::NashGain => "nash-gain",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intensity-mse" => Ok(Metric::IntensityMse),
            "geom-wealth-mse" => Ok(Metric::GeomWealthMse),
            "nash-gain" => Ok(Metric::NashGain),
            other => Err(Error::invalid(
                "metric",
                format!("unknown metric `{other}` (expected intensity-mse, geom-wealth-mse or nash-gain)"),
            )),
        }
    }
}

/// Limiting type plus the perturbation used to build each population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationTemplate {
    pub limiting: AgentType,
    pub perturbation: f64,
}

impl PopulationTemplate {
    pub fn homogeneous(limiting: AgentType) -> Self {
        Self {
            limiting,
            perturbation: 0.0,
        }
    }

    pub fn build(&self, n: usize) -> Result<PopulationSpec> {
        PopulationSpec::jittered(self.limiting, n, self.perturbation)
    }
}

/// Gain of one deviation at one population size.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationGain {
    pub label: String,
    pub gain: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub n: usize,
    pub value: f64,
    pub se: f64,
    /// Grid index at which the maximum over time was attained (MSE metrics).
    pub argmax_step: Option<usize>,
    /// The raw estimate was negative and has been floored at zero.
    pub floored: bool,
    pub deviations: Vec<DeviationGain>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateExperiment {
    pub metric: Metric,
    pub n_values: Vec<usize>,
    pub mc_paths: usize,
    pub seed: u64,
    pub rows: Vec<ExperimentRow>,
    pub slope: f64,
    pub slope_se: f64,
    /// Rows that were floored (gain) or excluded from the fit (nonpositive MSE).
    pub floored: usize,
}

fn check_n_values(n_values: &[usize]) -> Result<()> {
    if n_values.len() < 2 {
        return Err(Error::invalid("n", "need at least two population sizes"));
    }
    if n_values[0] == 0 || n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "n",
            "population sizes must be positive and strictly increasing",
        ));
    }
    Ok(())
}

/// Ordinary least squares of `log value` on `log n`. Returns the slope and
/// its standard error (NaN for two points).
pub fn fit_loglog_slope(rows: &[(f64, f64)]) -> Result<(f64, f64)> {
    if rows.len() < 2 {
        return Err(Error::domain("fit_loglog_slope", "need at least two rows"));
    }
    if let Some((n, v)) = rows.iter().find(|(n, v)| !(*v > 0.0) || !(*n > 0.0)) {
        return Err(Error::domain("fit_loglog_slope", format!("nonpositive row ({n}, {v})")));
    }
    let xs: Vec<f64> = rows.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, v)| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit_loglog_slope", "all n are equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let stderr = if rows.len() > 2 {
        let intercept = my - slope * mx;
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok((slope, stderr))
}

/// Per-grid-point mean and standard error over paths of a vector-valued
/// sample. Paths are reduced in fixed blocks, so the result does not depend
/// on scheduling.
fn pathwise_moments(
    mc: MonteCarlo,
    len: usize,
    sample: impl Fn(u64) -> Result<Vec<f64>> + Sync + Send,
) -> Result<(Vec<f64>, Vec<f64>)> {
    const BLOCK: usize = 16;
    let blocks = mc.paths.div_ceil(BLOCK);
    let partial = map_indexed(mc.exec, blocks, |b| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut s1 = vec![0.0; len];
        let mut s2 = vec![0.0; len];
        for p in b * BLOCK..((b + 1) * BLOCK).min(mc.paths) {
            let x = sample(p as u64)?;
            for ((a, q), v) in s1.iter_mut().zip(s2.iter_mut()).zip(&x) {
                *a += v;
                *q += v * v;
            }
        }
        Ok((s1, s2))
    });
    let mut s1 = vec![0.0; len];
    let mut s2 = vec![0.0; len];
    for part in partial {
        let (a, q) = part?;
        for k in 0..len {
            s1[k] += a[k];
            s2[k] += q[k];
        }
    }
    let m = mc.paths as f64;
    let mean: Vec<f64> = s1.iter().map(|s| s / m).collect();
    let se = mean
        .iter()
        .zip(&s2)
        .map(|(mu, q)| (((q / m - mu * mu) * m / (m - 1.0)).max(0.0) / m).sqrt())
        .collect();
    Ok((mean, se))
}

fn max_row(n: usize, mean: &[f64], se: &[f64]) -> ExperimentRow {
    let (k, value) = mean
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    ExperimentRow {
        n,
        value,
        se: se[k],
        argmax_step: Some(k),
        floored: false,
        deviations: Vec::new(),
    }
}

fn mse_experiment(metric: Metric, n_values: &[usize], mc: MonteCarlo, rows: Vec<ExperimentRow>) -> Result<RateExperiment> {
    let fit: Vec<(f64, f64)> = rows.iter().filter(|r| r.value > 0.0).map(|r| (r.n as f64, r.value)).collect();
    let floored = rows.len() - fit.len();
    let (slope, slope_se) = if fit.len() >= 2 {
        fit_loglog_slope(&fit)?
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(RateExperiment {
        metric,
        n_values: n_values.to_vec(),
        mc_paths: mc.paths,
        seed: mc.seed,
        rows,
        slope,
        slope_se,
        floored,
    })
}

/// `max_k E|Λ̄_{t_k} − λ^f_{t_k}|²` per population size, where
/// `Λ̄ = (1/n) Σ_i f(λ^i)` is the empirical mean jump rate.
pub fn intensity_mse_experiment(
    template: &PopulationTemplate,
    p: &MeanFieldParams,
    ip: &IntensityPath,
    n_values: &[usize],
    mc: MonteCarlo,
) -> Result<RateExperiment> {
    check_n_values(n_values)?;
    let grid = ip.grid;
    let f = &p.jump_rate;
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let pop = template.build(n)?;
        let (mean, se) = pathwise_moments(mc, grid.len(), |path| {
            let mut rng = stream(mc.seed, path, Channel::Hawkes);
            let h = simulate_hawkes_with(&pop, f, grid, &mut rng, HawkesOptions::default());
            Ok((0..grid.len())
                .map(|k| (h.mean_rate(f, k) - ip.lambda_f[k]).powi(2))
                .collect())
        })?;
        rows.push(max_row(n, &mean, &se));
    }
    mse_experiment(Metric::IntensityMse, n_values, mc, rows)
}

/// `max_k E|X̄_{t_k} − m*_{t_k}|²` per population size, with every agent
/// playing the approximate Nash profile and `m*` driven by the same
/// common-noise increments as the finite market.
pub fn geom_wealth_mse_experiment(
    template: &PopulationTemplate,
    p: &MeanFieldParams,
    ep: &EquilibriumPath,
    n_values: &[usize],
    mc: MonteCarlo,
) -> Result<RateExperiment> {
    check_n_values(n_values)?;
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let pop = template.build(n)?;
        let market = Market::new(pop.clone(), p, ep.grid.steps)?;
        let profile = build_nash_profile(&pop, p, ep);
        let len = ep.grid.len();
        let (mean, se) = pathwise_moments(mc, len, |path| {
            let (lgm, dw0) = log_geometric_mean_path(&market, &profile, mc.seed, path)?;
            let m_star = m_star_from_increments(p, ep, &dw0);
            Ok((0..len).map(|k| (lgm[k].exp() - m_star[k]).powi(2)).collect())
        })?;
        rows.push(max_row(n, &mean, &se));
    }
    mse_experiment(Metric::GeomWealthMse, n_values, mc, rows)
}

/// Parametric unilateral deviations used to probe the Nash gap.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviationFamily {
    /// Feedback control shifted by each `δ`.
    ConstantShift(Vec<f64>),
    /// Constant proportions.
    ConstantStrategy(Vec<f64>),
    /// Feedback control multiplied by each factor.
    ScaledMfe(Vec<f64>),
}

/// Upper cap applied to feedback deviations to keep them admissible.
pub const DEVIATION_CEILING: f64 = 0.99;

impl DeviationFamily {
    pub fn default_shift() -> Self {
        DeviationFamily::ConstantShift(vec![-0.2, -0.1, -0.05, -0.02, 0.0, 0.02, 0.05, 0.1, 0.2])
    }

    pub fn default_constant() -> Self {
        DeviationFamily::ConstantStrategy((0..10).map(|i| i as f64 / 10.0).collect())
    }

    pub fn default_scaled() -> Self {
        DeviationFamily::ScaledMfe(vec![0.5, 0.75, 1.25, 1.5])
    }

    pub fn defaults() -> Vec<Self> {
        vec![Self::default_shift(), Self::default_constant(), Self::default_scaled()]
    }

    /// Labelled strategies of the family.
    pub fn strategies(&self) -> Vec<(String, Strategy)> {
        match self {
            DeviationFamily::ConstantShift(ds) => ds
                .iter()
                .map(|&d| {
                    (
                        format!("shift({d})"),
                        Strategy::Nash {
                            shift: d,
                            scale: 1.0,
                            ceiling: DEVIATION_CEILING,
                        },
                    )
                })
                .collect(),
            DeviationFamily::ConstantStrategy(ps) => ps
                .iter()
                .map(|&v| (format!("constant({v})"), Strategy::Constant(v)))
                .collect(),
            DeviationFamily::ScaledMfe(ms) => ms
                .iter()
                .map(|&m| {
                    (
                        format!("scaled({m})"),
                        Strategy::Nash {
                            shift: 0.0,
                            scale: m,
                            ceiling: DEVIATION_CEILING,
                        },
                    )
                })
                .collect(),
        }
    }
}

/// For each `n`, the largest estimated gain of agent 0 over the deviation
/// families against everyone else playing the approximate Nash profile.
/// Baseline and all deviations share common random numbers; negative maxima
/// are floored at zero and the slope is fitted to `log(gain + ε)`.
pub fn nash_gain_experiment(
    template: &PopulationTemplate,
    p: &MeanFieldParams,
    ep: &EquilibriumPath,
    n_values: &[usize],
    families: &[DeviationFamily],
    mc: MonteCarlo,
) -> Result<RateExperiment> {
    check_n_values(n_values)?;
    let labelled: Vec<(String, Strategy)> = families.iter().flat_map(|f| f.strategies()).collect();
    if labelled.is_empty() {
        return Err(Error::invalid("family", "no deviations given"));
    }
    let strategies: Vec<Strategy> = labelled.iter().map(|(_, s)| s.clone()).collect();
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let pop = template.build(n)?;
        let market = Market::new(pop.clone(), p, ep.grid.steps)?;
        let profile = build_nash_profile(&pop, p, ep);
        let est = estimate_deviation_gains(&market, &profile, 0, &strategies, mc)?;
        let deviations: Vec<DeviationGain> = labelled
            .iter()
            .zip(&est.gains)
            .map(|((label, _), g)| DeviationGain {
                label: label.clone(),
                gain: g.mean,
                se: g.std_error,
            })
            .collect();
        let best = deviations
            .iter()
            .fold(None::<&DeviationGain>, |acc, d| match acc {
                Some(a) if a.gain >= d.gain => Some(a),
                _ => Some(d),
            })
            .expect("at least one deviation");
        let floored = best.gain < 0.0;
        rows.push(ExperimentRow {
            n,
            value: best.gain.max(0.0),
            se: best.se,
            argmax_step: None,
            floored,
            deviations,
        });
    }
    let fit: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.value + f64::EPSILON)).collect();
    let (slope, slope_se) = fit_loglog_slope(&fit)?;
    Ok(RateExperiment {
        metric: Metric::NashGain,
        n_values: n_values.to_vec(),
        mc_paths: mc.paths,
        seed: mc.seed,
        floored: rows.iter().filter(|r| r.floored).count(),
        rows,
        slope,
        slope_se,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let m = rx.len() as f64;
    let mean = (m + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - mean).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Accepts a decaying sequence: Spearman correlation of `(n, value)` at most
/// zero, or every value within 3 standard errors of its running minimum.
pub fn is_non_increasing(rows: &[ExperimentRow]) -> bool {
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let vs: Vec<f64> = rows.iter().map(|r| r.value).collect();
    if spearman(&ns, &vs) <= 0.0 {
        return true;
    }
    let mut envelope = f64::INFINITY;
    rows.iter().all(|r| {
        envelope = envelope.min(r.value);
        r.value - envelope <= 3.0 * r.se
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{mfe_path, solve_intensity_ode, PHI_TOL};
    use crate::model::JumpRate;

    #[test]
    fn slope_of_exact_power_laws() {
        let rows: Vec<(f64, f64)> = [16.0, 32.0, 64.0, 128.0].iter().map(|&n| (n, 3.0 / (n * n))).collect();
        let (s, se) = fit_loglog_slope(&rows).unwrap();
        assert!((s + 2.0).abs() < 1e-12);
        assert!(se < 1e-12);
        let flat: Vec<(f64, f64)> = [1.0, 2.0, 5.0].iter().map(|&n| (n, 0.7)).collect();
        assert!(fit_loglog_slope(&flat).unwrap().0.abs() < 1e-15);
        let (s, se) = fit_loglog_slope(&[(10.0, 1.0), (100.0, 0.1)]).unwrap();
        assert!((s + 1.0).abs() < 1e-12);
        assert!(se.is_nan());
        assert!(fit_loglog_slope(&[(10.0, 1.0), (100.0, 0.0)]).is_err());
        assert!(fit_loglog_slope(&[(10.0, 1.0)]).is_err());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [Metric::IntensityMse, Metric::GeomWealthMse, Metric::NashGain] {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert!("l2".parse::<Metric>().is_err());
    }

    #[test]
    fn spearman_and_accept_rule() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0])).abs() < 1e-15);
        let row = |n, value, se| ExperimentRow {
            n,
            value,
            se,
            argmax_step: None,
            floored: false,
            deviations: Vec::new(),
        };
        assert!(is_non_increasing(&[row(8, 1.0, 0.1), row(32, 0.5, 0.1), row(128, 0.6, 0.1)]));
        assert!(is_non_increasing(&[row(8, 0.1, 0.1), row(32, 0.2, 0.1), row(128, 0.25, 0.1)]));
        assert!(!is_non_increasing(&[
            row(8, 0.1, 0.01),
            row(32, 0.2, 0.01),
            row(128, 0.3, 0.01)
        ]));
    }

    #[test]
    fn n_values_must_increase() {
        assert!(check_n_values(&[4]).is_err());
        assert!(check_n_values(&[4, 4]).is_err());
        assert!(check_n_values(&[0, 4]).is_err());
        assert!(check_n_values(&[4, 8]).is_ok());
    }

    #[test]
    fn zero_rate_gives_zero_intensity_error() {
        let p = MeanFieldParams::default().with_jump_rate(JumpRate::zero()).with_horizon(2.0);
        let ip = solve_intensity_ode(&p, 100).unwrap();
        let t = PopulationTemplate::homogeneous(p.limiting);
        let e = intensity_mse_experiment(&t, &p, &ip, &[4, 8, 16], MonteCarlo::new(20, 1)).unwrap();
        assert!(e.rows.iter().all(|r| r.value == 0.0 && r.se == 0.0));
        assert_eq!(e.floored, 3);
        assert!(e.slope.is_nan());
    }

    #[test]
    fn deterministic_market_has_zero_wealth_error() {
        let mut o = AgentType::table1();
        o.sigma = 0.0;
        o.b = 0.01;
        let p = MeanFieldParams::default()
            .with_limiting(o)
            .with_jump_rate(JumpRate::zero())
            .with_horizon(2.0);
        let ip = solve_intensity_ode(&p, 50).unwrap();
        let ep = mfe_path(&p, &ip, PHI_TOL).unwrap();
        let t = PopulationTemplate::homogeneous(o);
        let e = geom_wealth_mse_experiment(&t, &p, &ep, &[2, 4], MonteCarlo::new(8, 3)).unwrap();
        assert!(e.rows.iter().all(|r| r.value < 1e-26), "{:?}", e.rows);
    }

    #[test]
    fn experiments_are_reproducible_and_nonnegative() {
        let p = MeanFieldParams::default().with_horizon(2.0);
        let ip = solve_intensity_ode(&p, 40).unwrap();
        let ep = mfe_path(&p, &ip, PHI_TOL).unwrap();
        let t = PopulationTemplate::homogeneous(p.limiting);
        let mc = MonteCarlo::new(40, 7);
        let a = intensity_mse_experiment(&t, &p, &ip, &[4, 8, 16], mc).unwrap();
        let b = intensity_mse_experiment(&t, &p, &ip, &[4, 8, 16], mc.sequential()).unwrap();
        assert_eq!(a, b);
        let g1 = geom_wealth_mse_experiment(&t, &p, &ep, &[4, 8, 16], mc).unwrap();
        let g2 = geom_wealth_mse_experiment(&t, &p, &ep, &[4, 8, 16], mc.sequential()).unwrap();
        assert_eq!(g1, g2);
        for r in a.rows.iter().chain(&g1.rows) {
            assert!(r.value >= 0.0 && r.se >= 0.0);
        }
    }

    #[test]
    fn zero_shift_has_exactly_zero_gain_and_overinvestment_loses() {
        let p = MeanFieldParams::default().with_horizon(3.0);
        let ip = solve_intensity_ode(&p, 60).unwrap();
        let ep = mfe_path(&p, &ip, PHI_TOL).unwrap();
        let t = PopulationTemplate::homogeneous(p.limiting);
        let e = nash_gain_experiment(&t, &p, &ep, &[4, 16], &DeviationFamily::defaults(), MonteCarlo::new(200, 1)).unwrap();
        for row in &e.rows {
            let zero = row.deviations.iter().find(|d| d.label == "shift(0)").unwrap();
            assert_eq!(zero.gain, 0.0);
            assert_eq!(zero.se, 0.0);
            let over = row.deviations.iter().find(|d| d.label == "constant(0.9)").unwrap();
            assert!(over.gain < 0.0);
            assert!(row.value >= 0.0);
        }
    }

    /// In the linear region the common factor of a homogeneous population has
    /// mean `λ^l` and variance solving
    /// `V' = −2(α − βς)V + (βς)² λ^l / n`, so the mean-square error is exactly
    /// of order `1/n`.
    fn variance_oracle(o: &AgentType, horizon: f64, steps: usize, n: usize) -> Vec<f64> {
        let h = horizon / steps as f64;
        let k = o.beta * o.varsigma;
        let rhs = |m: f64, v: f64| {
            (
                o.alpha * (o.lambda_inf - m) + k * m,
                -2.0 * (o.alpha - k) * v + k * k * m / n as f64,
            )
        };
        let (mut m, mut v) = (o.lambda0, 0.0);
        let mut out = vec![v];
        for _ in 0..steps {
            let (a1, b1) = rhs(m, v);
            let (a2, b2) = rhs(m + 0.5 * h * a1, v + 0.5 * h * b1);
            let (a3, b3) = rhs(m + 0.5 * h * a2, v + 0.5 * h * b2);
            let (a4, b4) = rhs(m + h * a3, v + h * b3);
            m += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            out.push(v);
        }
        out
    }

    #[test]
    fn intensity_error_matches_the_variance_equation() {
        let p = MeanFieldParams::default();
        let ip = solve_intensity_ode(&p, 200).unwrap();
        let pop = PopulationSpec::homogeneous(p.limiting, 32);
        let mc = MonteCarlo::new(2000, 5);
        let (mean, se) = pathwise_moments(mc, ip.grid.len(), |path| {
            let mut rng = stream(mc.seed, path, Channel::Hawkes);
            let h = simulate_hawkes_with(&pop, &p.jump_rate, ip.grid, &mut rng, HawkesOptions::default());
            Ok((0..ip.grid.len())
                .map(|k| (h.mean_rate(&p.jump_rate, k) - ip.lambda_f[k]).powi(2))
                .collect())
        })
        .unwrap();
        let oracle = variance_oracle(&p.limiting, 10.0, 200, 32);
        for k in [50, 100, 200] {
            assert!(
                (mean[k] - oracle[k]).abs() < 3.0 * se[k],
                "t_{k}: {} ± {} vs {}",
                mean[k],
                se[k],
                oracle[k]
            );
        }
        // the oracle itself scales exactly like 1/n
        let twice = variance_oracle(&p.limiting, 10.0, 200, 64);
        assert!((oracle[200] / twice[200] - 2.0).abs() < 1e-12);
    }
}
