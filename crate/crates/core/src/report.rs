//! CSV and JSON artifacts. Every CSV starts with one `#`-prefixed line of
//! JSON metadata (at least the seed and the configuration digest); numbers
//! are written with 17 significant digits and lines end in `\n`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::Result;
use crate::market::{ObjectiveEstimate, PathSummary};
use crate::meanfield::{EquilibriumPath, IntensityPath};
use crate::verify::RateExperiment;

/// Metadata carried by every artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub config_digest: String,
}

impl Provenance {
    fn header(&self, kind: &str, extra: Value) -> Value {
        let mut v = json!({
            "kind": kind,
            "seed": self.seed,
            "config_digest": self.config_digest,
        });
        if let (Some(map), Value::Object(more)) = (v.as_object_mut(), extra) {
            map.extend(more);
        }
        v
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV document with its metadata line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.header);
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }
}

/// Parses the metadata line of a rendered CSV.
pub fn read_header(csv: &str) -> Option<Value> {
    let first = csv.lines().next()?.strip_prefix("# ")?;
    serde_json::from_str(first).ok()
}

/// `t, lambda_l, lambda_f, pi_star, eta_star, rho, varphi`.
pub fn equilibrium_csv(prov: &Provenance, ip: &IntensityPath, ep: &EquilibriumPath) -> CsvTable {
    let rows = (0..ep.grid.len())
        .map(|k| {
            [
                ep.grid.time(k),
                ip.lambda_l[k],
                ip.lambda_f[k],
                ep.pi_star[k],
                ep.eta_star[k],
                ep.rho[k],
                ep.varphi[k],
            ]
            .into_iter()
            .map(fmt_f64)
            .collect()
        })
        .collect();
    CsvTable {
        header: prov.header("equilibrium", json!({ "steps": ep.grid.steps, "horizon": ep.grid.horizon })),
        columns: vec!["t", "lambda_l", "lambda_f", "pi_star", "eta_star", "rho", "varphi"],
        rows,
    }
}

/// `param_value, pi_star`.
pub fn sweep_csv(prov: &Provenance, param: &str, t_eval: f64, points: &[(f64, f64)]) -> CsvTable {
    CsvTable {
        header: prov.header("sensitivity", json!({ "param": param, "t": t_eval })),
        columns: vec!["param_value", "pi_star"],
        rows: points.iter().map(|&(v, pi)| vec![fmt_f64(v), fmt_f64(pi)]).collect(),
    }
}

/// `path_id, agent, X_T, logX_T, N_T`.
pub fn per_path_csv(prov: &Provenance, summaries: &[PathSummary]) -> CsvTable {
    let rows = summaries
        .iter()
        .flat_map(|s| {
            s.log_wealth.iter().zip(&s.jump_counts).enumerate().map(move |(i, (lw, n))| {
                vec![
                    s.path_id.to_string(),
                    i.to_string(),
                    fmt_f64(lw.exp()),
                    fmt_f64(*lw),
                    n.to_string(),
                ]
            })
        })
        .collect();
    CsvTable {
        header: prov.header("paths", json!({ "paths": summaries.len() })),
        columns: vec!["path_id", "agent", "X_T", "logX_T", "N_T"],
        rows,
    }
}

/// `{J_i, se, paths, seed, config_digest, agent}`.
pub fn objective_json(prov: &Provenance, agent: usize, est: &ObjectiveEstimate) -> Value {
    json!({
        "J_i": est.mean,
        "se": est.std_error,
        "paths": est.paths,
        "seed": prov.seed,
        "config_digest": prov.config_digest,
        "agent": agent,
    })
}

/// `{metric, rows: [{n, value, se}], slope, slope_se, seed, config_digest}`.
pub fn experiment_json(prov: &Provenance, e: &RateExperiment) -> Value {
    let rows: Vec<Value> = e
        .rows
        .iter()
        .map(|r| {
            let mut row = json!({ "n": r.n, "value": r.value, "se": r.se, "floored": r.floored });
            if let Some(k) = r.argmax_step {
                row["argmax_step"] = json!(k);
            }
            if !r.deviations.is_empty() {
                row["deviations"] = r
                    .deviations
                    .iter()
                    .map(|d| json!({ "label": d.label, "gain": d.gain, "se": d.se }))
                    .collect();
            }
            row
        })
        .collect();
    json!({
        "metric": e.metric.as_str(),
        "rows": rows,
        "slope": e.slope,
        "slope_se": e.slope_se,
        "floored": e.floored,
        "paths": e.mc_paths,
        "seed": prov.seed,
        "config_digest": prov.config_digest,
    })
}

/// `n, value, se` mirror of [`experiment_json`].
pub fn experiment_csv(prov: &Provenance, e: &RateExperiment) -> CsvTable {
    CsvTable {
        header: prov.header(
            "experiment",
            json!({ "metric": e.metric.as_str(), "slope": e.slope, "slope_se": e.slope_se, "paths": e.mc_paths }),
        ),
        columns: vec!["n", "value", "se"],
        rows: e
            .rows
            .iter()
            .map(|r| vec![r.n.to_string(), fmt_f64(r.value), fmt_f64(r.se)])
            .collect(),
    }
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

pub fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{mfe_path, solve_intensity_ode, PHI_TOL};
    use crate::model::MeanFieldParams;

    fn prov() -> Provenance {
        Provenance {
            seed: 42,
            config_digest: "abc".into(),
        }
    }

    #[test]
    fn equilibrium_csv_layout() {
        let p = MeanFieldParams::default();
        let ip = solve_intensity_ode(&p, 10).unwrap();
        let ep = mfe_path(&p, &ip, PHI_TOL).unwrap();
        let text = equilibrium_csv(&prov(), &ip, &ep).render();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines.len(), 1 + 1 + 11 + 1);
        assert_eq!(lines[1], "t,lambda_l,lambda_f,pi_star,eta_star,rho,varphi");
        assert_eq!(lines.last(), Some(&""));
        assert!(!text.contains('\r'));
        let h = read_header(&text).unwrap();
        assert_eq!(h["seed"], 42);
        assert_eq!(h["config_digest"], "abc");
        // values round-trip exactly
        let pi: f64 = lines[2 + 3].split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(pi, ep.pi_star[3]);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 12_345.678_901_234_5] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn per_path_rows() {
        let s = PathSummary {
            path_id: 3,
            log_wealth: vec![0.0, 0.5f64.ln()],
            jump_counts: vec![0, 2],
        };
        let t = per_path_csv(&prov(), &[s]);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1][0], "3");
        assert_eq!(t.rows[1][1], "1");
        assert_eq!(t.rows[1][2].parse::<f64>().unwrap(), 0.5);
        assert_eq!(t.rows[1][4], "2");
    }

    #[test]
    fn writes_into_new_directories() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_artifact(&dir.path().join("a/b"), "x.json", "{}\n").unwrap();
        assert_eq!(fs::read_to_string(path).unwrap(), "{}\n");
    }
}
