use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use contagion_mfg::hawkes::write_jumps;
use contagion_mfg::market::{
    build_nash_profile, estimate_objective, mean_log_wealth_consistency, moment_oracle, simulate_market, simulate_summaries,
    Market, Strategy, StrategyProfile,
};
use contagion_mfg::meanfield::{mfe_path, sensitivity_sweep, solve_intensity_ode, SweepParam, PHI_TOL};
use contagion_mfg::report::{
    equilibrium_csv, experiment_csv, experiment_json, objective_json, per_path_csv, render_json, sweep_csv, write_artifact,
    Provenance,
};
use contagion_mfg::verify::{
    geom_wealth_mse_experiment, intensity_mse_experiment, is_non_increasing, nash_gain_experiment, DeviationFamily, Metric,
    PopulationTemplate,
};
use contagion_mfg::{Config, Error, MonteCarlo, PopulationSpec};
use serde_json::json;

/// Mean-field portfolio game with contagious jumps.
#[derive(Debug, Parser)]
#[command(name = "contagion-mfg", version)]
struct Cli {
    /// JSON configuration; defaults are used for anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Limiting intensity and equilibrium strategy on the time grid.
    MfePath(Steps),
    /// Equilibrium proportion at time t as one parameter varies.
    Sensitivity(SensitivityArgs),
    /// Simulates the n-player market under the approximate Nash profile.
    Simulate(SimulateArgs),
    /// Mean log-wealth of representative agents against m*.
    Consistency(ConsistencyArgs),
    /// Convergence-rate experiments.
    Verify(VerifyArgs),
    /// Monte Carlo objective against the closed-form moment.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
struct Steps {
    /// Time steps on [0, horizon]; defaults to run.time_steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args)]
struct SensitivityArgs {
    #[arg(long)]
    param: String,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long, default_value_t = 3.0)]
    t: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    steps: Steps,
    /// Monte Carlo paths; defaults to run.mc_paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Agent whose objective is reported.
    #[arg(long, default_value_t = 0)]
    agent: usize,
    /// Also write the jumps of path 0 as a binary dump.
    #[arg(long)]
    dump_jumps: bool,
}

#[derive(Debug, Args)]
struct ConsistencyArgs {
    #[command(flatten)]
    steps: Steps,
    /// Number of representative agents.
    #[arg(long, default_value_t = 10_000)]
    k: usize,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    metric: String,
    /// Comma-separated, strictly increasing population sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[command(flatten)]
    steps: Steps,
    /// Exit with status 3 unless the result lies in the acceptance band.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Constant proportions to test.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.6])]
    pi: Vec<f64>,
    /// Exit with status 3 unless every estimate is within 3 standard errors.
    #[arg(long)]
    check: bool,
}

enum Failure {
    Core(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn invalid(path: &str, detail: impl Into<String>) -> Failure {
    Failure::Core(Error::Invalid {
        path: path.into(),
        detail: detail.into(),
    })
}

struct Context {
    cfg: Config,
    prov: Provenance,
    out: PathBuf,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self, Failure> {
        let mut cfg = match &cli.config {
            Some(path) => Config::from_json(&fs::read_to_string(path).map_err(Error::from)?)?,
            None => Config::default(),
        };
        if let Some(seed) = cli.seed {
            cfg.run.seed = seed;
        }
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.run.out_dir.clone().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let prov = Provenance {
            seed: cfg.run.seed,
            config_digest: cfg.digest(),
        };
        Ok(Self { cfg, prov, out })
    }

    fn steps(&self, s: &Steps) -> usize {
        s.steps.unwrap_or(self.cfg.run.time_steps)
    }

    fn mc(&self, paths: Option<usize>) -> MonteCarlo {
        MonteCarlo::new(paths.unwrap_or(self.cfg.run.mc_paths), self.cfg.run.seed)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        Ok(write_artifact(&self.out, name, contents)?)
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn run(cli: Cli) -> Result<String, Failure> {
    let ctx = Context::load(&cli)?;
    let p = ctx.cfg.params();
    match &cli.command {
        Command::MfePath(s) => {
            let ip = solve_intensity_ode(&p, ctx.steps(s))?;
            let ep = mfe_path(&p, &ip, PHI_TOL)?;
            let path = ctx.write("equilibrium.csv", &equilibrium_csv(&ctx.prov, &ip, &ep).render())?;
            let last = ep.pi_star.len() - 1;
            Ok(format!(
                "pi_star(0)={:.6} pi_star(T)={:.6} lambda_f(T)={:.6} max_residual={:.2e} -> {}",
                ep.pi_star[0],
                ep.pi_star[last],
                ip.lambda_f[last],
                ep.max_residual(&ip, &p.limiting),
                show(&path)
            ))
        }
        Command::Sensitivity(a) => {
            let param: SweepParam = a.param.parse()?;
            if a.points < 2 {
                return Err(invalid("points", "must be >= 2"));
            }
            if !(a.from.is_finite() && a.to.is_finite()) {
                return Err(invalid("from", "range must be finite"));
            }
            if !(a.t > 0.0 && a.t <= p.horizon) {
                return Err(invalid("t", format!("must lie in (0, {}]", p.horizon)));
            }
            let values: Vec<f64> = (0..a.points)
                .map(|i| a.from + (a.to - a.from) * i as f64 / (a.points - 1) as f64)
                .collect();
            let points = sensitivity_sweep(&p, param, &values, a.t)?;
            let name = format!("sensitivity_{}.csv", a.param);
            let path = ctx.write(&name, &sweep_csv(&ctx.prov, &a.param, a.t, &points).render())?;
            Ok(format!(
                "{} from {} to {}: pi_star {:.6} -> {:.6} -> {}",
                a.param,
                a.from,
                a.to,
                points[0].1,
                points[points.len() - 1].1,
                show(&path)
            ))
        }
        Command::Simulate(a) => {
            let steps = ctx.steps(&a.steps);
            let mc = ctx.mc(a.paths);
            let pop = ctx.cfg.population_spec()?;
            if a.agent >= pop.n() {
                return Err(invalid("agent", format!("must be < n = {}", pop.n())));
            }
            let ip = solve_intensity_ode(&p, steps)?;
            let ep = mfe_path(&p, &ip, PHI_TOL)?;
            let market = Market::new(pop.clone(), &p, steps)?;
            let profile = build_nash_profile(&pop, &p, &ep);
            let summaries = simulate_summaries(&market, &profile, mc)?;
            let csv = ctx.write("paths.csv", &per_path_csv(&ctx.prov, &summaries).render())?;
            let est = estimate_objective(&market, &profile, a.agent, mc)?;
            let json = ctx.write("objective.json", &render_json(&objective_json(&ctx.prov, a.agent, &est)))?;
            let mut files = vec![show(&csv), show(&json)];
            if a.dump_jumps {
                let path0 = simulate_market(&market, &profile, mc.seed, 0)?;
                let mut buf = Vec::new();
                write_jumps(&mut buf, pop.n(), &path0.hawkes.jumps)?;
                fs::create_dir_all(&ctx.out).map_err(Error::from)?;
                let dump = ctx.out.join("jumps.bin");
                fs::write(&dump, buf).map_err(Error::from)?;
                files.push(show(&dump));
            }
            Ok(format!(
                "n={} paths={} J_{}={:.6e} se={:.2e} -> {}",
                pop.n(),
                mc.paths,
                a.agent,
                est.mean,
                est.std_error,
                files.join(", ")
            ))
        }
        Command::Consistency(a) => {
            if a.k < 2 {
                return Err(invalid("k", "must be >= 2"));
            }
            let ip = solve_intensity_ode(&p, ctx.steps(&a.steps))?;
            let ep = mfe_path(&p, &ip, PHI_TOL)?;
            let dev = mean_log_wealth_consistency(&p, &ep, &ip, a.k, ctx.prov.seed, Default::default())?;
            let doc = json!({
                "k": a.k,
                "deviation": dev,
                "seed": ctx.prov.seed,
                "config_digest": ctx.prov.config_digest,
            });
            let path = ctx.write("consistency.json", &render_json(&doc))?;
            Ok(format!("K={} max deviation={:.6e} -> {}", a.k, dev, show(&path)))
        }
        Command::Verify(a) => verify(&ctx, a),
        Command::OracleCheck(a) => oracle_check(&ctx, a),
    }
}

fn verify(ctx: &Context, a: &VerifyArgs) -> Result<String, Failure> {
    let metric: Metric = a.metric.parse()?;
    let p = ctx.cfg.params();
    let steps = ctx.steps(&a.steps);
    let mc = ctx.mc(a.paths);
    if mc.paths < 2 {
        return Err(invalid("paths", "must be >= 2"));
    }
    let template = PopulationTemplate {
        limiting: p.limiting,
        perturbation: ctx.cfg.population.perturbation,
    };
    let ip = solve_intensity_ode(&p, steps)?;
    let e = match metric {
        Metric::IntensityMse => intensity_mse_experiment(&template, &p, &ip, &a.n, mc)?,
        Metric::GeomWealthMse => {
            let ep = mfe_path(&p, &ip, PHI_TOL)?;
            geom_wealth_mse_experiment(&template, &p, &ep, &a.n, mc)?
        }
        Metric::NashGain => {
            let ep = mfe_path(&p, &ip, PHI_TOL)?;
            nash_gain_experiment(&template, &p, &ep, &a.n, &DeviationFamily::defaults(), mc)?
        }
    };
    let stem = format!("verify_{}", metric.as_str().replace('-', "_"));
    let json = ctx.write(&format!("{stem}.json"), &render_json(&experiment_json(&ctx.prov, &e)))?;
    let csv = ctx.write(&format!("{stem}.csv"), &experiment_csv(&ctx.prov, &e).render())?;
    let values: Vec<String> = e.rows.iter().map(|r| format!("{}:{:.3e}", r.n, r.value)).collect();
    let summary = format!(
        "{} slope={:.4} se={:.4} rows=[{}] -> {}, {}",
        metric,
        e.slope,
        e.slope_se,
        values.join(" "),
        show(&json),
        show(&csv)
    );
    if a.check {
        let (ok, band) = match metric {
            Metric::IntensityMse => ((-2.5..=-1.5).contains(&e.slope), "slope in [-2.5, -1.5]"),
            Metric::GeomWealthMse => (e.slope <= -0.3, "slope <= -0.3"),
            Metric::NashGain => (is_non_increasing(&e.rows), "gain non-increasing in n"),
        };
        if !ok {
            return Err(Failure::Check(format!("{summary}\ncheck failed: expected {band}")));
        }
    }
    Ok(summary)
}

fn oracle_check(ctx: &Context, a: &OracleArgs) -> Result<String, Failure> {
    if a.paths < 2 {
        return Err(invalid("paths", "must be >= 2"));
    }
    let mut o = ctx.cfg.limiting_type;
    o.beta = 0.0;
    o.theta = 0.0;
    let p = ctx.cfg.params().with_limiting(o);
    // without excitation the factor is deterministic; integrate f along it exactly
    let rate_integral = exact_rate_integral(&p, a.steps)?;
    let market = Market::new(PopulationSpec::homogeneous(o, 1), &p, a.steps)?;
    let mut rows = Vec::new();
    let mut all_ok = true;
    for &pi in &a.pi {
        let profile = StrategyProfile::open_loop(vec![Strategy::Constant(pi)], market.grid)?;
        let est = estimate_objective(&market, &profile, 0, ctx.mc(Some(a.paths)))?;
        let exact = moment_oracle(&o, pi, p.r, p.horizon, rate_integral);
        let z = (est.mean - exact) / est.std_error;
        all_ok &= z.abs() <= 3.0;
        rows.push(json!({ "pi": pi, "estimate": est.mean, "se": est.std_error, "oracle": exact, "z": z }));
    }
    let doc = json!({
        "rows": rows,
        "paths": a.paths,
        "seed": ctx.prov.seed,
        "config_digest": ctx.prov.config_digest,
    });
    let path = ctx.write("oracle.json", &render_json(&doc))?;
    let zs: Vec<String> = doc["rows"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|r| format!("pi={} z={:.2}", r["pi"], r["z"].as_f64().unwrap_or(f64::NAN)))
        .collect();
    let summary = format!("{} -> {}", zs.join(", "), show(&path));
    if a.check && !all_ok {
        return Err(Failure::Check(format!(
            "{summary}\ncheck failed: an estimate is more than 3 SE from the oracle"
        )));
    }
    Ok(summary)
}

/// `∫_0^T f(λ_s) ds` for the excitation-free factor, by composite Simpson on
/// a fine grid.
fn exact_rate_integral(p: &contagion_mfg::MeanFieldParams, steps: usize) -> Result<f64, Failure> {
    let o = &p.limiting;
    let m = 2 * steps.max(1000);
    let h = p.horizon / m as f64;
    let g = |t: f64| {
        p.jump_rate
            .eval_f(o.lambda_inf + (o.lambda0 - o.lambda_inf) * (-o.alpha * t).exp())
    };
    let mut acc = g(0.0)? + g(p.horizon)?;
    for j in 1..m {
        acc += if j % 2 == 1 { 4.0 } else { 2.0 } * g(j as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

/// Thread count requested through `MFG_THREADS`, if set.
fn requested_threads() -> Result<Option<usize>, Failure> {
    let Ok(raw) = std::env::var("MFG_THREADS") else {
        return Ok(None);
    };
    raw.trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .map(Some)
        .ok_or_else(|| invalid("MFG_THREADS", format!("expected a positive integer, got `{raw}`")))
}

#[cfg(feature = "parallel")]
fn configure_threads() -> Result<(), Failure> {
    let Some(threads) = requested_threads()? else {
        return Ok(());
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| invalid("MFG_THREADS", e.to_string()))
}

/// Sequential build: the value is validated but otherwise ignored.
#[cfg(not(feature = "parallel"))]
fn configure_threads() -> Result<(), Failure> {
    requested_threads().map(drop)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|_| run(cli)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Check(msg)) => {
            println!("{msg}");
            ExitCode::from(3)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
